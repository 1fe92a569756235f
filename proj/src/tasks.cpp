#include "dualopt/tasks.hpp"

#include <cmath>
#include <stdexcept>

namespace dualopt {

namespace {

constexpr std::size_t kClusterPoints = 16;  // per label, per cluster

Buffer random_uniform(std::mt19937_64& rng, std::size_t dim, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Buffer out = Buffer::zeros({dim});
  for (double& x : out) x = dist(rng);
  return out;
}

Buffer random_gaussian(std::mt19937_64& rng, std::size_t dim, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Buffer out = Buffer::zeros({dim});
  for (double& x : out) x = dist(rng);
  return out;
}

Buffer random_unit(std::mt19937_64& rng, std::size_t dim) {
  Buffer v = random_gaussian(rng, dim, 1.0);
  const double n = norm(v);
  if (n < 1e-12) {
    v[0] = 1.0;
    return v;
  }
  return scale(v, 1.0 / n);
}

Buffer clip_to_radius(Buffer g, double radius) {
  const double n = norm(g);
  if (n > radius) {
    return scale(g, radius / n);
  }
  return g;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean binary cross-entropy of the logit model sigma(theta . x) over one
// cluster, in a numerically stable log1p form.
double logistic_loss(const std::vector<Buffer>& xs, const std::vector<double>& ys,
                     const Buffer& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = dot(theta, xs[i]);
    // log(1+e^z) - y*z, stable for both signs of z.
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    total += softplus - ys[i] * z;
  }
  return total / static_cast<double>(xs.size());
}

Buffer logistic_gradient(const std::vector<Buffer>& xs, const std::vector<double>& ys,
                         const Buffer& theta) {
  Buffer g = zeros_like(theta);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double err = sigmoid(dot(theta, xs[i])) - ys[i];
    axpy(g, err, xs[i]);
  }
  return scale(g, 1.0 / static_cast<double>(xs.size()));
}

// Two labeled blobs around `center`, split along `axis`.
void fill_cluster(std::mt19937_64& rng, const Buffer& center, const Buffer& axis,
                  std::vector<Buffer>& xs, std::vector<double>& ys) {
  for (std::size_t k = 0; k < 2 * kClusterPoints; ++k) {
    const double label = k < kClusterPoints ? 1.0 : 0.0;
    Buffer x = add(center, scale(axis, label > 0.5 ? 0.5 : -0.5));
    axpy(x, 1.0, random_gaussian(rng, center.size(), 0.2));
    xs.push_back(std::move(x));
    ys.push_back(label);
  }
}

}  // namespace

ToyTask make_task(TaskKind kind, std::uint64_t seed, std::size_t dim, double clip_radius) {
  if (dim < 1 || dim > 64) {
    throw std::invalid_argument("make_task: dimension must lie in [1, 64]");
  }
  if (!(clip_radius > 0.0)) {
    throw std::invalid_argument("make_task: clip radius must be positive");
  }

  ToyTask task;
  task.kind = kind;
  task.dim = dim;
  task.clip_radius = clip_radius;
  task.seed = seed;
  std::mt19937_64 rng(seed);

  switch (kind) {
    case TaskKind::ConflictingQuadratic:
      task.n_objectives = 2;
      task.a = random_uniform(rng, dim, -1.0, 1.0);
      task.b = random_uniform(rng, dim, -1.0, 1.0);
      break;
    case TaskKind::LogisticForgetRetain: {
      task.n_objectives = 2;
      const Buffer center_f = scale(random_unit(rng, dim), 2.0);
      const Buffer axis_f = random_unit(rng, dim);
      const Buffer center_r = scale(random_unit(rng, dim), 2.0);
      const Buffer axis_r = random_unit(rng, dim);
      fill_cluster(rng, center_f, axis_f, task.x_forget, task.y_forget);
      fill_cluster(rng, center_r, axis_r, task.x_retain, task.y_retain);
      break;
    }
    case TaskKind::ThreeTask:
      task.n_objectives = 3;
      for (int i = 0; i < 3; ++i) {
        task.anchors.push_back(random_uniform(rng, dim, -1.0, 1.0));
      }
      break;
    default:
      throw std::invalid_argument("make_task: unknown task kind");
  }
  return task;
}

double task_loss(const ToyTask& task, std::size_t objective, const Buffer& theta) {
  if (objective >= task.n_objectives) {
    throw std::invalid_argument("task_loss: unknown objective id");
  }
  switch (task.kind) {
    case TaskKind::ConflictingQuadratic: {
      const Buffer& anchor = objective == 0 ? task.b : task.a;
      const Buffer r = sub(theta, anchor);
      const double half_sq = 0.5 * dot(r, r);
      return objective == 0 ? -half_sq : half_sq;
    }
    case TaskKind::LogisticForgetRetain:
      if (objective == 0) {
        return -logistic_loss(task.x_forget, task.y_forget, theta);
      }
      return logistic_loss(task.x_retain, task.y_retain, theta);
    case TaskKind::ThreeTask: {
      const Buffer r = sub(theta, task.anchors[objective]);
      return 0.5 * dot(r, r);
    }
  }
  throw std::invalid_argument("task_loss: unknown task kind");
}

Buffer task_gradient(const ToyTask& task, std::size_t objective, const Buffer& theta) {
  if (objective >= task.n_objectives) {
    throw std::invalid_argument("task_gradient: unknown objective id");
  }
  switch (task.kind) {
    case TaskKind::ConflictingQuadratic: {
      if (objective == 0) {
        return clip_to_radius(scale(sub(theta, task.b), -1.0), task.clip_radius);
      }
      return sub(theta, task.a);
    }
    case TaskKind::LogisticForgetRetain:
      if (objective == 0) {
        return clip_to_radius(scale(logistic_gradient(task.x_forget, task.y_forget, theta), -1.0),
                              task.clip_radius);
      }
      return logistic_gradient(task.x_retain, task.y_retain, theta);
    case TaskKind::ThreeTask:
      return sub(theta, task.anchors[objective]);
  }
  throw std::invalid_argument("task_gradient: unknown task kind");
}

StreamSampler::StreamSampler(const SyntheticStream& config)
    : config_(config), rng_(config.seed) {
  validate_dynamics(config.dynamics);
  if (config.dimension < 1) {
    throw std::invalid_argument("stream sampler: dimension must be positive");
  }
  if (config.noise_amplitude < 0.0) {
    throw std::invalid_argument("stream sampler: noise amplitude must be >= 0");
  }
  const double worst_mean =
      std::max(std::fabs(config.dynamics.m), std::fabs(config.dynamics.n)) * config.dynamics.G;
  if (worst_mean + config.noise_amplitude > config.dynamics.G + 1e-12) {
    throw std::invalid_argument(
        "stream sampler: mean plus noise amplitude exceeds the gradient bound G");
  }
}

std::pair<Buffer, Buffer> StreamSampler::next_pair() {
  const double amp = config_.noise_amplitude;
  std::uniform_real_distribution<double> noise(-amp, amp);
  const double mean_f = config_.dynamics.m * config_.dynamics.G;
  const double mean_r = config_.dynamics.n * config_.dynamics.G;
  Buffer g_f = Buffer::full({config_.dimension}, mean_f);
  Buffer g_r = Buffer::full({config_.dimension}, mean_r);
  if (amp > 0.0) {
    for (std::size_t i = 0; i < config_.dimension; ++i) g_f[i] += noise(rng_);
    for (std::size_t i = 0; i < config_.dimension; ++i) g_r[i] += noise(rng_);
  }
  return {std::move(g_f), std::move(g_r)};
}

}  // namespace dualopt
