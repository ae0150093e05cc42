#include "harsanyi/model_io.hpp"

#include <zlib.h>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "harsanyi/errors.hpp"

namespace harsanyi {
namespace {

constexpr const char* kMagic = "harsanyinet v1";

std::string real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Percent-escapes whitespace and '%'; the empty string is written as "%".
std::string word(const std::string& s) {
  if (s.empty()) return "%";
  std::string out;
  for (unsigned char ch : s) {
    if (ch <= 0x20 || ch == '%' || ch == 0x7f) {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", ch);
      out += buf;
    } else {
      out += static_cast<char>(ch);
    }
  }
  return out;
}

std::string unword(const std::string& s) {
  if (s == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out += s[i];
      continue;
    }
    if (i + 2 >= s.size()) throw FormatError("bad escape in " + s);
    int v = 0;
    const auto res = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
    if (res.ec != std::errc() || res.ptr != s.data() + i + 3) throw FormatError("bad escape in " + s);
    out += static_cast<char>(v);
    i += 2;
  }
  return out;
}

void put_reals(std::ostream& out, const std::string& key, const std::vector<double>& v) {
  out << key << ' ' << v.size();
  for (double x : v) out << ' ' << real(x);
  out << '\n';
}

void put_preprocessing(std::ostream& out, const Preprocessing& prep) {
  out << "preprocessing " << prep.columns.size() << '\n';
  out << "label_column " << word(prep.label_column) << '\n';
  out << "labels " << prep.label_names.size();
  for (const auto& name : prep.label_names) out << ' ' << word(name);
  out << '\n';
  for (const auto& c : prep.columns) {
    if (c.categorical) {
      out << "column categorical " << word(c.name) << ' ' << c.levels.size();
      for (const auto& level : c.levels) out << ' ' << word(level);
    } else {
      out << "column numeric " << word(c.name) << ' ' << real(c.mean) << ' ' << real(c.sd);
    }
    out << '\n';
  }
}

std::string seal(const std::string& body) {
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return body + "checksum " + buf + "\n";
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

// Line-oriented reader over the verified body.
class Reader {
 public:
  explicit Reader(const std::string& body) : in_(body) {}

  // Next line split into words; `key` must match the first.
  std::vector<std::string> expect(const std::string& key) {
    std::string line;
    if (!std::getline(in_, line)) throw FormatError("unexpected end of model, wanted " + key);
    ++line_no_;
    std::istringstream ss(line);
    std::vector<std::string> words;
    for (std::string w; ss >> w;) words.push_back(w);
    if (words.empty() || words[0] != key) {
      throw FormatError("line " + std::to_string(line_no_) + ": expected '" + key + "'");
    }
    return words;
  }

  bool at_end() {
    return in_.peek() == std::char_traits<char>::eof();
  }

  int integer(const std::string& s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw FormatError("line " + std::to_string(line_no_) + ": bad integer '" + s + "'");
    }
    return v;
  }

  double number(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw FormatError("line " + std::to_string(line_no_) + ": bad real '" + s + "'");
    }
    return v;
  }

  // `key <count> v...`, checking count against `expected`.
  std::vector<double> reals(const std::string& key, std::size_t expected) {
    auto w = expect(key);
    if (w.size() < 2) throw FormatError("line " + std::to_string(line_no_) + ": missing count");
    const auto count = static_cast<std::size_t>(integer(w[1]));
    if (count != expected || w.size() != count + 2) {
      throw FormatError("line " + std::to_string(line_no_) + ": " + key + " has wrong length");
    }
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) out[k] = number(w[k + 2]);
    return out;
  }

  // `key value`
  std::string value(const std::string& key) {
    auto w = expect(key);
    if (w.size() != 2) throw FormatError("line " + std::to_string(line_no_) + ": bad " + key);
    return w[1];
  }

  int line() const { return line_no_; }

 private:
  std::istringstream in_;
  int line_no_ = 1;
};

Preprocessing read_preprocessing(Reader& r) {
  Preprocessing prep;
  const int n = r.integer(r.value("preprocessing"));
  prep.label_column = unword(r.value("label_column"));
  auto labels = r.expect("labels");
  if (labels.size() < 2 || static_cast<std::size_t>(r.integer(labels[1])) != labels.size() - 2) {
    throw FormatError("bad labels record");
  }
  for (std::size_t k = 2; k < labels.size(); ++k) prep.label_names.push_back(unword(labels[k]));
  for (int c = 0; c < n; ++c) {
    auto w = r.expect("column");
    ColumnSpec spec;
    if (w.size() >= 4 && w[1] == "categorical") {
      spec.categorical = true;
      spec.name = unword(w[2]);
      const auto count = static_cast<std::size_t>(r.integer(w[3]));
      if (w.size() != count + 4) throw FormatError("bad categorical column record");
      for (std::size_t k = 4; k < w.size(); ++k) spec.levels.push_back(unword(w[k]));
    } else if (w.size() == 5 && w[1] == "numeric") {
      spec.name = unword(w[2]);
      spec.mean = r.number(w[3]);
      spec.sd = r.number(w[4]);
    } else {
      throw FormatError("bad column record at line " + std::to_string(r.line()));
    }
    prep.columns.push_back(std::move(spec));
  }
  return prep;
}

std::vector<int> integers(Reader& r, const std::vector<std::string>& w, std::size_t from) {
  std::vector<int> out;
  for (std::size_t k = from; k < w.size(); ++k) out.push_back(r.integer(w[k]));
  return out;
}

HarsanyiMlp read_mlp(Reader& r) {
  ModelConfig cfg;
  cfg.input_dim = r.integer(r.value("input_dim"));
  auto players = r.expect("player_of_input");
  cfg.player_of_input = integers(r, players, 1);
  auto units = r.expect("units");
  cfg.units = integers(r, units, 1);
  cfg.class_count = r.integer(r.value("class_count"));
  cfg.beta = r.number(r.value("beta"));
  cfg.gamma = r.number(r.value("gamma"));
  cfg.children_scope = parse_children_scope(r.value("children_scope"));
  cfg.and_mode = parse_and_mode(r.value("and_mode"));
  HarsanyiMlp model = [&] {
    try {
      return HarsanyiMlp(cfg);
    } catch (const ContractError& e) {
      throw FormatError(std::string("invalid model config: ") + e.what());
    }
  }();
  for (int l = 0; l < model.block_count(); ++l) {
    auto& b = model.block(l);
    b.tau = r.reals("tau", b.tau.size());
    b.weights = r.reals("weights", b.weights.size());
  }
  model.head() = r.reals("head", model.head().size());
  return model;
}

HarsanyiCnn read_cnn(Reader& r) {
  CnnConfig cfg;
  auto stem = r.expect("stem");
  if (stem.size() != 7) throw FormatError("bad stem record");
  cfg.stem.in_channels = r.integer(stem[1]);
  cfg.stem.image_height = r.integer(stem[2]);
  cfg.stem.image_width = r.integer(stem[3]);
  cfg.stem.kernel = r.integer(stem[4]);
  cfg.stem.channels = r.integer(stem[5]);
  cfg.stem.pool = r.integer(stem[6]);
  auto blocks = r.expect("blocks");
  if (blocks.size() != 6 || blocks[4] != "stride=1" || blocks[5] != "padding=same") {
    throw FormatError("bad blocks record");
  }
  cfg.blocks = r.integer(blocks[1]);
  cfg.channels = r.integer(blocks[2]);
  cfg.kernel = r.integer(blocks[3]);
  cfg.class_count = r.integer(r.value("class_count"));
  cfg.beta = r.number(r.value("beta"));
  cfg.gamma = r.number(r.value("gamma"));
  cfg.and_mode = parse_and_mode(r.value("and_mode"));
  HarsanyiCnn model = [&] {
    try {
      return HarsanyiCnn(cfg);
    } catch (const ContractError& e) {
      throw FormatError(std::string("invalid model config: ") + e.what());
    }
  }();
  model.stem().weights = r.reals("stem_weights", model.stem().weights.size());
  model.stem().bias = r.reals("stem_bias", model.stem().bias.size());
  for (auto& b : model.blocks()) {
    b.tau = r.reals("tau", b.tau.size());
    b.weights = r.reals("weights", b.weights.size());
  }
  model.head() = r.reals("head", model.head().size());
  return model;
}

}  // namespace

std::string serialize_model(const HarsanyiMlp& model, const Preprocessing* prep) {
  const auto& cfg = model.config();
  std::ostringstream out;
  out << kMagic << '\n' << "topology mlp\n";
  out << "input_dim " << cfg.input_dim << '\n';
  out << "player_of_input";
  for (int c = 0; c < cfg.input_dim; ++c) out << ' ' << cfg.player_of(c);
  out << '\n' << "units";
  for (int u : cfg.units) out << ' ' << u;
  out << '\n';
  out << "class_count " << cfg.class_count << '\n';
  out << "beta " << real(cfg.beta) << '\n';
  out << "gamma " << real(cfg.gamma) << '\n';
  out << "children_scope " << children_scope_name(cfg.children_scope) << '\n';
  out << "and_mode " << and_mode_name(cfg.and_mode) << '\n';
  for (const auto& b : model.blocks()) {
    put_reals(out, "tau", b.tau);
    put_reals(out, "weights", b.weights);
  }
  put_reals(out, "head", model.head());
  if (prep) put_preprocessing(out, *prep);
  return seal(out.str());
}

std::string serialize_model(const HarsanyiCnn& model, const Preprocessing* prep) {
  const auto& cfg = model.config();
  const auto& s = cfg.stem;
  std::ostringstream out;
  out << kMagic << '\n' << "topology conv\n";
  out << "stem " << s.in_channels << ' ' << s.image_height << ' ' << s.image_width << ' '
      << s.kernel << ' ' << s.channels << ' ' << s.pool << '\n';
  out << "blocks " << cfg.blocks << ' ' << cfg.channels << ' ' << cfg.kernel
      << " stride=1 padding=same\n";
  out << "class_count " << cfg.class_count << '\n';
  out << "beta " << real(cfg.beta) << '\n';
  out << "gamma " << real(cfg.gamma) << '\n';
  out << "and_mode " << and_mode_name(cfg.and_mode) << '\n';
  put_reals(out, "stem_weights", model.stem().weights);
  put_reals(out, "stem_bias", model.stem().bias);
  for (const auto& b : model.blocks()) {
    put_reals(out, "tau", b.tau);
    put_reals(out, "weights", b.weights);
  }
  put_reals(out, "head", model.head());
  if (prep) put_preprocessing(out, *prep);
  return seal(out.str());
}

void save_model(const HarsanyiMlp& model, const std::string& path, const Preprocessing* prep) {
  write_file(path, serialize_model(model, prep));
}

void save_model(const HarsanyiCnn& model, const std::string& path, const Preprocessing* prep) {
  write_file(path, serialize_model(model, prep));
}

LoadedModel parse_model(const std::string& text) {
  const std::string magic = std::string(kMagic) + "\n";
  if (text.compare(0, 12, "harsanyinet ") == 0 && text.compare(0, magic.size(), magic) != 0) {
    const auto eol = text.find('\n');
    throw FormatError("unsupported model version: " + text.substr(0, eol));
  }
  if (text.compare(0, magic.size(), magic) != 0) throw FormatError("not a harsanyinet model file");
  if (text.empty() || text.back() != '\n') throw FormatError("model file is truncated");
  const auto last = text.rfind('\n', text.size() - 2);
  const std::string tail = text.substr(last + 1, text.size() - last - 2);
  if (tail.compare(0, 9, "checksum ") != 0 || tail.size() != 17) {
    throw FormatError("model file is truncated (no checksum)");
  }
  const std::string body = text.substr(0, last + 1);
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  if (tail.substr(9) != buf) throw FormatError("model file checksum mismatch");

  Reader r(body.substr(magic.size()));
  const std::string topology = r.value("topology");
  auto build = [&]() -> std::variant<HarsanyiMlp, HarsanyiCnn> {
    if (topology == "mlp") return read_mlp(r);
    if (topology == "conv") return read_cnn(r);
    throw FormatError("unknown topology '" + topology + "'");
  };
  try {
    LoadedModel loaded{build(), std::nullopt};
    if (!r.at_end()) loaded.preprocessing = read_preprocessing(r);
    if (!r.at_end()) throw FormatError("trailing records in model file");
    return loaded;
  } catch (const ContractError& e) {
    throw FormatError(std::string("invalid model file: ") + e.what());
  }
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

HarsanyiMlp load_mlp(const std::string& path, std::optional<Preprocessing>* prep) {
  auto loaded = load_model(path);
  if (!loaded.is_mlp()) throw TopologyError(path + " holds a conv model, expected mlp");
  if (prep) *prep = std::move(loaded.preprocessing);
  return std::get<HarsanyiMlp>(std::move(loaded.model));
}

HarsanyiCnn load_cnn(const std::string& path, std::optional<Preprocessing>* prep) {
  auto loaded = load_model(path);
  if (!loaded.is_cnn()) throw TopologyError(path + " holds an mlp model, expected conv");
  if (prep) *prep = std::move(loaded.preprocessing);
  return std::get<HarsanyiCnn>(std::move(loaded.model));
}

}  // namespace harsanyi
