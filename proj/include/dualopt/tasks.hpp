#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "dualopt/buffer.hpp"
#include "dualopt/theory.hpp"

namespace dualopt {

enum class TaskKind { ConflictingQuadratic, LogisticForgetRetain, ThreeTask };

// Small analytic tasks with explicit gradients.
//
// ConflictingQuadratic: retain loss 0.5*|theta - a|^2, forget loss
// -0.5*|theta - b|^2 (gradient ascent away from b); the forget gradient is
// norm-clipped to clip_radius so the unbounded ascent objective cannot
// blow up a run.
//
// LogisticForgetRetain: two point clusters with binary labels. The retain
// objective minimizes mean cross-entropy on cluster R; the forget objective
// maximizes it on cluster F (again with a clipped gradient).
//
// ThreeTask: three quadratic objectives 0.5*|theta - anchors[i]|^2 served
// round-robin.
struct ToyTask {
  TaskKind kind = TaskKind::ConflictingQuadratic;
  std::size_t dim = 16;
  std::size_t n_objectives = 2;
  double clip_radius = 10.0;
  std::uint64_t seed = 0;

  Buffer a;
  Buffer b;
  std::vector<Buffer> anchors;

  std::vector<Buffer> x_forget;
  std::vector<double> y_forget;
  std::vector<Buffer> x_retain;
  std::vector<double> y_retain;
};

ToyTask make_task(TaskKind kind, std::uint64_t seed, std::size_t dim = 16,
                  double clip_radius = 10.0);

double task_loss(const ToyTask& task, std::size_t objective, const Buffer& theta);

// Analytic gradient of the objective at theta (clipped where the task says
// so). Objective 0 is the forget objective for the two-objective tasks.
Buffer task_gradient(const ToyTask& task, std::size_t objective, const Buffer& theta);

// Random gradient stream with per-coordinate means m*G (objective 0) and
// n*G (objective 1) plus i.i.d. uniform noise; every entry stays within
// [-G, G], which bounds the admissible amplitude.
struct SyntheticStream {
  GradientDynamics dynamics;
  double noise_amplitude = 0.0;
  std::size_t dimension = 16;
  std::uint64_t seed = 0;
};

class StreamSampler {
 public:
  explicit StreamSampler(const SyntheticStream& config);

  // One fresh draw per objective for this step; alternating consumers take
  // the scheduled one, joint consumers take both. Drawing both keeps the
  // stream identical across methods run from the same seed.
  std::pair<Buffer, Buffer> next_pair();

 private:
  SyntheticStream config_;
  std::mt19937_64 rng_;
};

}  // namespace dualopt
