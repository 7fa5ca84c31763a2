// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations the library is checked against.
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mvact/codec.hpp"
#include "mvact/demo_data.hpp"
#include "mvact/render.hpp"

namespace oracle {

using namespace mvact;

/// Evaluates both keyframe conditions at every step, then merges candidates
/// by checking each against every previously kept index.
std::vector<int> keyframes(const sim::Trajectory& traj, const demo::KeyframeParams& params);

/// Random trajectory with pauses, gripper toggles and occasional near-eps speeds.
sim::Trajectory synthetic_trajectory(std::mt19937_64& rng);

/// Per pixel, scans every point for the nearest one landing in it.
std::vector<render::VirtualView> render(const sim::PointCloud& cloud, const std::vector<render::OrthoView>& views);

/// Triple loop over (ix, iy, iz) with its own cell centers and interpolation.
Eigen::Index best_cell(const std::vector<Eigen::VectorXd>& maps, const std::vector<render::OrthoView>& views,
                       const Box3& bounds, int g, codec::ViewFusion fusion);

struct SampleRef {
  int anchor = 0;
  std::vector<int> target_keyframes;
};

/// Slides over [0, k1, ..., k_{m-1}] and takes the next h keyframes.
std::vector<SampleRef> enumerate_samples(const std::vector<int>& keyframes, int h);

/// One LAMB step on a single parameter tensor written out longhand.
struct LambRef {
  std::vector<double> m, v;
  int t = 0;
};
void lamb_step(std::vector<double>& w, const std::vector<double>& g, LambRef& s, double lr, double beta1,
               double beta2, double eps, double wd);

/// Shannon entropy of a probability vector (natural log).
double entropy(const Eigen::VectorXd& p);

}  // namespace oracle
