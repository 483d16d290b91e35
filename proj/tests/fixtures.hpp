#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentlens/dataset.hpp"
#include "latentlens/explainers.hpp"
#include "latentlens/rng.hpp"
#include "latentlens/traversal.hpp"

namespace fixture {

namespace ll = latentlens;
namespace fs = std::filesystem;

// Fresh, empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latentlens-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Pixel-aligned filled rectangle, no anti-aliasing.
inline ll::ImageSample block(int side, int x0, int y0, int w, int h, double value) {
  ll::ImageSample img(side, side, 0.0);
  for (int r = y0; r < y0 + h; ++r) {
    for (int c = x0; c < x0 + w; ++c) {
      if (r >= 0 && r < side && c >= 0 && c < side) img.at(r, c) = value;
    }
  }
  return img;
}

inline ll::TraversalSequence sequence_from(std::vector<ll::ImageSample> frames) {
  ll::TraversalSequence s;
  s.spec.base.values = {0.0};
  s.assigned_values = ll::traversal_values(-3.0, 3.0, 0.6);
  s.assigned_values.resize(frames.size());
  s.frames = std::move(frames);
  s.sequence_id = "synthetic";
  s.model = "synthetic";
  return s;
}

enum class Motion { Horizontal, Vertical, Scale, Intensity };

struct SyntheticCase {
  Motion motion = Motion::Horizontal;
  bool increasing = true;
  ll::TraversalSequence sequence;
  std::string expected_statistic;  // as named by HeuristicFinding
  std::string expected_direction;
};

// Noise-free 11-frame sequence with exactly one varying factor.
inline SyntheticCase synthetic_case(Motion motion, std::uint64_t seed) {
  ll::SplitMix64 g(seed);
  constexpr int side = 48;
  const bool inc = g.below(2) == 1;
  const int size = 6 + static_cast<int>(g.below(5));
  const int x = 4 + static_cast<int>(g.below(6));
  const int y = 4 + static_cast<int>(g.below(6));
  std::vector<ll::ImageSample> frames;
  for (int j = 0; j < 11; ++j) {
    const int t = inc ? j : 10 - j;
    switch (motion) {
      case Motion::Horizontal:
        frames.push_back(block(side, x + 3 * t, y + 8, size, size, 1.0));
        break;
      case Motion::Vertical:
        frames.push_back(block(side, x + 8, y + 3 * t, size, size, 1.0));
        break;
      case Motion::Scale: {
        // grows about a fixed center
        const int half = 3 + t * 2;
        frames.push_back(block(side, 24 - half, 24 - half, 2 * half, 2 * half, 1.0));
        break;
      }
      case Motion::Intensity:
        frames.push_back(block(side, x + 8, y + 8, size + 8, size + 8, 0.6 + 0.04 * t));
        break;
    }
  }
  SyntheticCase c;
  c.motion = motion;
  c.increasing = inc;
  c.sequence = sequence_from(std::move(frames));
  switch (motion) {
    case Motion::Horizontal:
      c.expected_statistic = "horizontal_position";
      c.expected_direction = inc ? "left to right" : "right to left";
      break;
    case Motion::Vertical:
      c.expected_statistic = "vertical_position";
      c.expected_direction = inc ? "top to bottom" : "bottom to top";
      break;
    case Motion::Scale:
      c.expected_statistic = "size";
      c.expected_direction = inc ? "smaller to larger" : "larger to smaller";
      break;
    case Motion::Intensity:
      c.expected_statistic = "brightness";
      c.expected_direction = inc ? "darker to brighter" : "brighter to darker";
      break;
  }
  return c;
}

// Scenario pools in the two regimes: a clear pattern gets consistent
// paraphrases, an unclear one gets a spread of unrelated guesses.
inline ll::ScriptedScenario scenario(const std::string& id, std::size_t topic, double noise_p) {
  static const std::vector<std::pair<std::string, std::string>> topics = {
      {"horizontal position", "the shape moves from left to right"},
      {"vertical position", "the shape moves from top to bottom"},
      {"size", "the shape grows from small to large"},
      {"rotation", "the shape turns clockwise"},
      {"stroke thickness", "the digit strokes become thicker"},
      {"slant", "the digit leans further to the right"},
      {"width", "the shape stretches horizontally"},
      {"brightness", "the image becomes brighter"},
  };
  const auto& [what, how] = topics[topic % topics.size()];
  ll::ScriptedScenario s;
  s.scenario_id = id;
  s.noise_p = noise_p;
  s.on_topic_pool = {
      "The latent variable controls " + what + ": " + how + ".",
      "This latent variable controls the " + what + ", and " + how + ".",
      "The latent variable changes the " + what + "; " + how + " across the images.",
  };
  s.off_topic_pool = {
      "It might be the background texture, though nothing obvious changes.",
      "Perhaps the digit turns into a different number halfway through.",
      "The images look blurry and I cannot identify a single factor.",
      "Possibly the color saturation, but the frames are grayscale.",
      "Maybe lighting from the upper corner shifts slightly.",
      "There seem to be several unrelated features changing at once.",
      "The outline gets noisier while the interior stays fixed.",
      "I think a second object appears near the bottom edge.",
  };
  return s;
}

inline std::vector<ll::ScriptedScenario> table_scenarios(int clear, int unclear,
                                                         std::uint64_t seed) {
  ll::SplitMix64 g(seed);
  std::vector<ll::ScriptedScenario> out;
  for (int i = 0; i < clear; ++i) {
    out.push_back(scenario("clear-" + std::to_string(i), g.below(8), 0.1 * g.uniform()));
  }
  for (int i = 0; i < unclear; ++i) {
    out.push_back(
        scenario("unclear-" + std::to_string(i), g.below(8), 0.9 + 0.1 * g.uniform()));
  }
  return out;
}

}  // namespace fixture
