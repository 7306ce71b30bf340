#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "lifenet/checkpoint.hpp"

using namespace lifenet;

namespace {

bool bit_equal(const Network<float>& a, const Network<float>& b) {
  const auto x = a.flat_parameters(), y = b.flat_parameters();
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  for (auto [n, m] : {std::pair{1, 1}, {2, 3}, {3, 8}}) {
    auto net = init_unit_normal(build_network({n, m, 16, 24}), static_cast<std::uint64_t>(n * 100 + m));
    auto flat = net.flat_parameters();
    flat[0] = std::numeric_limits<float>::denorm_min();
    flat[1] = -0.0f;
    flat[2] = 3.4e38f;
    flat[3] = 1.0f / 3.0f;
    net.set_flat_parameters(flat);
    const Provenance p{"exp-1", 42, 7, 30};
    const auto loaded = checkpoint_from_string(checkpoint_to_string(net, p));
    EXPECT_TRUE(bit_equal(loaded.network, net));
    EXPECT_TRUE(std::signbit(loaded.network.flat_parameters()[1]));
    EXPECT_EQ(loaded.network.spec().board_width, 24u);
    EXPECT_EQ(loaded.provenance, p);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "lifenet_test.ckpt";
  const auto net = hand_engineered_weights(2);
  save_checkpoint(net, Provenance{}, path.string());
  EXPECT_TRUE(bit_equal(load_checkpoint(path.string()).network, net));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), std::runtime_error);
}

TEST(Checkpoint, TruncationIsReported) {
  const auto text = checkpoint_to_string(hand_engineered_weights(1), Provenance{});
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 2, text.size() - 5}) {
    try {
      checkpoint_from_string(text.substr(0, cut));
      FAIL() << "cut at " << cut;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find("checkpoint"), std::string::npos) << e.what();
    }
  }
}

TEST(Checkpoint, VersionAndShapeChecks) {
  const auto text = checkpoint_to_string(hand_engineered_weights(1), Provenance{});
  auto bumped = text;
  bumped.replace(bumped.find("format-version 1"), 16, "format-version 2");
  EXPECT_THROW(checkpoint_from_string(bumped), VersionError);

  auto wrong_m = text;
  wrong_m.replace(wrong_m.find("overcompleteness 1"), 18, "overcompleteness 2");
  EXPECT_THROW(checkpoint_from_string(wrong_m), ParseError);

  auto bad_value = text;
  bad_value.replace(bad_value.find("bias -3"), 7, "bias x3");
  EXPECT_THROW(checkpoint_from_string(bad_value), ParseError);

  EXPECT_THROW(checkpoint_from_string("not a checkpoint\n"), ParseError);
}
