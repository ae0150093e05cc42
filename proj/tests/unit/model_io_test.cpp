#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include <zlib.h>

#include "harsanyi/errors.hpp"
#include "harsanyi/model_io.hpp"
#include "support.hpp"

namespace harsanyi {
namespace {

using testing::rng_for;

// Replaces the checksum line so edits to the body reach the parser.
std::string reseal(const std::string& text) {
  const auto last = text.rfind('\n', text.size() - 2);
  const std::string body = text.substr(0, last + 1);
  char buf[32];
  std::snprintf(buf, sizeof buf, "checksum %08lx\n",
                static_cast<unsigned long>(crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                                                 static_cast<uInt>(body.size()))));
  return body + buf;
}

Preprocessing sample_preprocessing() {
  Preprocessing p;
  p.label_column = "income class";
  p.label_names = {"<=50K", ">50K"};
  p.columns.push_back({"age", false, 38.5, 13.25, {}});
  p.columns.push_back({"work class", true, 0.0, 1.0, {"Private", "", "Self emp%"}});
  p.columns.push_back({"hours", false, 40.0, 0.0, {}});
  return p;
}

TEST(ModelIo, MlpOutputsAreBitExactAfterRoundTrip) {
  auto rng = rng_for(101);
  testing::RandomMlpOptions o;
  o.inputs = 9;
  o.class_count = 3;
  o.gamma = 7.3;
  const auto m = testing::random_mlp(o, rng);
  const auto loaded = parse_model(serialize_model(m));
  ASSERT_TRUE(loaded.is_mlp());
  const auto& back = std::get<HarsanyiMlp>(loaded.model);
  for (int k = 0; k < 100; ++k) {
    const auto s = testing::random_sample(9, rng, 3.0);
    for (auto mode : {AndMode::kHard, AndMode::kSoft}) {
      EXPECT_EQ(model_output(m, s, PlayerSet::full(9), mode), model_output(back, s, PlayerSet::full(9), mode));
    }
  }
  EXPECT_EQ(back.config().gamma, 7.3);
  EXPECT_FALSE(loaded.preprocessing.has_value());
}

TEST(ModelIo, CnnOutputsAreBitExactAfterRoundTrip) {
  auto rng = rng_for(102);
  testing::RandomCnnOptions o;
  o.height = o.width = 8;
  o.pool = 2;
  o.in_channels = 2;
  const auto m = testing::random_cnn(o, rng);
  const auto loaded = parse_model(serialize_model(m));
  ASSERT_TRUE(loaded.is_cnn());
  const auto& back = std::get<HarsanyiCnn>(loaded.model);
  const FieldSet all(m.locations(), 0);
  for (int k = 0; k < 100; ++k) {
    const auto img = testing::random_image(m.config().image_size(), rng);
    const auto a = cnn_output(m, cnn_forward(m, img, ~all, AndMode::kSoft));
    const auto b = cnn_output(back, cnn_forward(back, img, ~all, AndMode::kSoft));
    EXPECT_EQ(a, b);
  }
}

TEST(ModelIo, SaveLoadSaveIsByteIdentical) {
  auto rng = rng_for(103);
  testing::TempDir dir("model-io");
  const auto prep = sample_preprocessing();
  testing::RandomMlpOptions o;
  o.inputs = 5;
  auto m = testing::random_mlp(o, rng);
  m.mutable_config().player_of_input = {0, 1, 1, 1, 2};
  const auto first = dir.path() / "a.model";
  const auto second = dir.path() / "b.model";
  save_model(m, first.string(), &prep);
  std::optional<Preprocessing> loaded_prep;
  const auto back = load_mlp(first.string(), &loaded_prep);
  ASSERT_TRUE(loaded_prep.has_value());
  EXPECT_EQ(loaded_prep->columns[1].levels, prep.columns[1].levels);
  EXPECT_EQ(loaded_prep->label_column, "income class");
  EXPECT_EQ(loaded_prep->columns[0].sd, 13.25);
  save_model(back, second.string(), &*loaded_prep);
  EXPECT_EQ(testing::read_file(first), testing::read_file(second));

  const auto cnn = testing::random_cnn({}, rng);
  EXPECT_EQ(serialize_model(cnn), serialize_model(std::get<HarsanyiCnn>(parse_model(serialize_model(cnn)).model)));
}

TEST(ModelIo, EveryTruncationIsAFormatError) {
  auto rng = rng_for(104);
  const auto text = serialize_model(testing::random_mlp({}, rng));
  for (std::size_t cut = 0; cut < text.size(); cut += 7) {
    EXPECT_THROW(parse_model(text.substr(0, cut)), FormatError) << "cut " << cut;
  }
  // Cuts at line boundaries leave well-formed lines but no checksum.
  for (std::size_t eol = text.find('\n'); eol + 1 < text.size(); eol = text.find('\n', eol + 1)) {
    EXPECT_THROW(parse_model(text.substr(0, eol + 1)), FormatError) << "line cut " << eol;
  }
}

TEST(ModelIo, CorruptionAndVersionErrors) {
  auto rng = rng_for(105);
  const auto text = serialize_model(testing::random_mlp({}, rng));
  std::string flipped = text;
  flipped[text.size() / 2] = flipped[text.size() / 2] == '1' ? '2' : '1';
  try {
    parse_model(flipped);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
  std::string v2 = text;
  v2.replace(0, 14, "harsanyinet v2");
  try {
    parse_model(reseal(v2));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  EXPECT_THROW(parse_model("hello\n"), FormatError);
  // A resealed body that breaks a record fails in the parser, not later.
  std::string broken = text;
  broken.replace(broken.find("units "), 6, "unitz ");
  EXPECT_THROW(parse_model(reseal(broken)), FormatError);
  // Semantic violations inside a well-formed file are format errors too.
  std::string bad_gamma = text;
  const auto g = bad_gamma.find("gamma ");
  bad_gamma.replace(g, bad_gamma.find('\n', g) - g, "gamma -1");
  EXPECT_THROW(parse_model(reseal(bad_gamma)), FormatError);
}

TEST(ModelIo, CrossTopologyGuard) {
  auto rng = rng_for(106);
  testing::TempDir dir("model-io-topology");
  const auto conv_path = (dir.path() / "conv.model").string();
  const auto mlp_path = (dir.path() / "mlp.model").string();
  save_model(testing::random_cnn({}, rng), conv_path);
  save_model(testing::random_mlp({}, rng), mlp_path);
  EXPECT_THROW(load_mlp(conv_path), TopologyError);
  EXPECT_THROW(load_cnn(mlp_path), TopologyError);
  EXPECT_NO_THROW(load_mlp(mlp_path));
  EXPECT_NO_THROW(load_cnn(conv_path));
  EXPECT_THROW(load_model((dir.path() / "missing.model").string()), Error);
}

}  // namespace
}  // namespace harsanyi
