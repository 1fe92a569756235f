#include "dualopt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dualopt/config.hpp"

namespace dualopt {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<std::uint64_t>(p[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::Joint: return "joint";
    case Method::Alternate: return "alternate";
    case Method::DualOptim: return "dualoptim";
    case Method::DualOptimPlus: return "dualoptim_plus";
    case Method::Scaffold: return "scaffold";
    case Method::FedCM: return "fedcm";
    case Method::LocalAdam: return "local_adam";
  }
  return "unknown";
}

namespace {

bool is_fl_method(Method m) {
  return m == Method::Scaffold || m == Method::FedCM || m == Method::LocalAdam;
}

BaselineKind fl_kind(Method m) {
  switch (m) {
    case Method::Scaffold: return BaselineKind::Scaffold;
    case Method::FedCM: return BaselineKind::FedCM;
    default: return BaselineKind::LocalAdam;
  }
}

// Near-square factorization for running matrix-shaped optimizers on a flat
// parameter vector.
std::vector<std::size_t> matrix_shape(std::size_t dim) {
  std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)));
  while (r > 1 && dim % r != 0) --r;
  return {r, dim / r};
}

void validate_run_config(const RunConfig& c, std::size_t n_objectives) {
  if (c.total_steps < 1) {
    throw std::invalid_argument("run config: total_steps must be >= 1");
  }
  if (n_objectives == 2 && c.total_steps < c.forget_freq + c.retain_freq) {
    throw std::invalid_argument("run config: total_steps must cover one full period");
  }
  if (c.mode == OptimMode::Muon && c.method != Method::DualOptimPlus) {
    throw std::invalid_argument("run config: mode=muon requires method=dualoptim_plus");
  }
  if (c.quantize_states != QuantizedSubset::None) {
    if (c.method == Method::DualOptim) {
      if (c.quantize_states != QuantizedSubset::Both) {
        throw std::invalid_argument(
            "run config: dualoptim supports quantize_states none or both only");
      }
    } else if (c.method != Method::DualOptimPlus) {
      throw std::invalid_argument(
          "run config: quantize_states applies to dualoptim_plus and dualoptim only");
    }
  }
  if ((c.method == Method::Joint || is_fl_method(c.method)) && n_objectives != 2) {
    throw std::invalid_argument("run config: this method handles exactly two objectives");
  }
  if (!(c.forget_weight >= 0.0) || !std::isfinite(c.forget_weight)) {
    throw std::invalid_argument("run config: forget_weight must be finite and >= 0");
  }
}

Buffer initial_theta(const RunConfig& c, const ToyTask& task) {
  Buffer theta = Buffer::zeros({c.dim});
  if (c.theta0_offset > 0.0) {
    std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Buffer u = Buffer::zeros({c.dim});
    for (double& x : u) x = gauss(rng);
    const double n = norm(u);
    if (n > 1e-12) u = scale(u, 1.0 / n);
    if (task.kind == TaskKind::ConflictingQuadratic) {
      theta = task.a;
    }
    axpy(theta, c.theta0_offset, u);
  }
  return theta;
}

// Reconstructed momentum and actually applied (pre-learning-rate) direction
// of a plain AdamW state after its step.
void adamw_directions(const AdamWState& s, double eps, Buffer& momentum, Buffer& precond) {
  momentum = bias_correct(s.m, s.t);
  const Buffer v_hat = bias_correct(s.v, s.t);
  precond = momentum;
  for (std::size_t i = 0; i < precond.size(); ++i) {
    precond[i] = momentum[i] / (std::sqrt(std::fabs(v_hat[i])) + eps);
  }
}

void fl_directions(const FlState& s, std::size_t obj, double eps, Buffer& momentum,
                   Buffer& precond) {
  if (s.kind == BaselineKind::LocalAdam) {
    adamw_directions(s.local[obj], eps, momentum, precond);
    return;
  }
  momentum = add(s.base_m, bias_correct(s.delta_m[obj], s.objective_counters[obj]));
  const Buffer v_hat = bias_correct(s.delta_v[obj], s.objective_counters[obj]);
  precond = momentum;
  for (std::size_t i = 0; i < precond.size(); ++i) {
    precond[i] = momentum[i] / (std::sqrt(std::fabs(s.base_v[i] + v_hat[i])) + eps);
  }
}

}  // namespace

RunReport run_experiment(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();

  ToyTask task = make_task(cfg.task, cfg.seed, cfg.dim, cfg.clip_radius);
  const std::size_t n_obj = task.n_objectives;
  validate_run_config(cfg, n_obj);

  Buffer theta = initial_theta(cfg, task);

  AdamWParams params{cfg.peak_lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
  MuonParams muon{cfg.peak_lr, cfg.muon_momentum, cfg.ns_iterations, kMuonQuinticCoeffs};

  const AlternationSchedule alt{cfg.forget_freq, cfg.retain_freq, cfg.total_steps};
  const LrSchedule lrs{cfg.peak_lr, cfg.warmup_steps, cfg.total_steps};

  // Method state (only the active method's slots are populated).
  AdamWState shared;
  std::vector<AdamWState> decoupled;
  std::vector<QuantizedBuffer> decoupled_q_m, decoupled_q_v;
  FlState fl;
  QuantizedDualState dual;
  const bool dual_matrix = cfg.mode == OptimMode::Muon;
  const std::vector<std::size_t> mshape = dual_matrix ? matrix_shape(cfg.dim)
                                                      : std::vector<std::size_t>{cfg.dim};

  switch (cfg.method) {
    case Method::Joint:
    case Method::Alternate:
      shared = make_adamw_state(theta, params);
      break;
    case Method::DualOptim:
      decoupled.assign(n_obj, make_adamw_state(theta, params));
      if (cfg.quantize_states == QuantizedSubset::Both) {
        for (AdamWState& s : decoupled) {
          decoupled_q_m.push_back(quantize(s.m.value, cfg.block_size));
          decoupled_q_v.push_back(quantize(s.v.value, cfg.block_size));
        }
      }
      break;
    case Method::DualOptimPlus: {
      DualConfig dc;
      dc.mode = cfg.mode;
      dc.n_objectives = n_obj;
      dc.base_update_timing = cfg.base_update_timing;
      dc.base_update_input = cfg.base_update_input;
      dc.adamw = params;
      dc.muon = muon;
      dc.base_beta1 = cfg.base_beta1;
      dc.base_beta2 = cfg.base_beta2;
      dual = make_quantized_dual_state(Buffer::zeros(mshape), dc, cfg.quantize_states,
                                       cfg.block_size);
      break;
    }
    default:
      fl = make_fl_state(theta, fl_kind(cfg.method), params);
      break;
  }

  RunReport report;
  report.config = cfg;
  report.config_echo = config_echo(cfg);
  report.rows.reserve(static_cast<std::size_t>(cfg.total_steps));

  std::vector<StepDirections> directions;
  directions.reserve(static_cast<std::size_t>(cfg.total_steps));

  for (std::int64_t t = 1; t <= cfg.total_steps; ++t) {
    const std::size_t obj = n_obj == 2
                                ? static_cast<std::size_t>(objective_at(alt, t))
                                : static_cast<std::size_t>((t - 1) % static_cast<std::int64_t>(n_obj));
    const double lr = lr_at(lrs, t);
    params.lr = lr;
    muon.lr = lr;

    Buffer dir_momentum;
    Buffer dir_precond;
    try {
      if (cfg.method == Method::Joint) {
        const Buffer g_f = task_gradient(task, 0, theta);
        const Buffer g_r = task_gradient(task, 1, theta);
        joint_step(theta, g_f, g_r, shared, params, cfg.forget_weight);
        adamw_directions(shared, params.eps, dir_momentum, dir_precond);
      } else {
        Buffer g = task_gradient(task, obj, theta);
        if (obj == 0 && cfg.forget_weight != 1.0) {
          g = scale(g, cfg.forget_weight);
        }
        switch (cfg.method) {
          case Method::Alternate:
            alternate_step(theta, g, obj, shared, params);
            adamw_directions(shared, params.eps, dir_momentum, dir_precond);
            break;
          case Method::DualOptim:
            dualoptim_step(theta, g, obj, decoupled, params);
            if (cfg.quantize_states == QuantizedSubset::Both) {
              requantize_moment(decoupled[obj].m, decoupled_q_m[obj], cfg.block_size);
              requantize_moment(decoupled[obj].v, decoupled_q_v[obj], cfg.block_size);
            }
            adamw_directions(decoupled[obj], params.eps, dir_momentum, dir_precond);
            break;
          case Method::DualOptimPlus: {
            dual.inner.config.adamw.lr = lr;
            dual.inner.config.muon.lr = lr;
            StepTrace trace;
            if (dual_matrix) {
              Buffer theta_m = theta.reshaped(mshape);
              quantized_state_step(theta_m, g.reshaped(mshape), obj, dual, &trace);
              theta = theta_m.reshaped({cfg.dim});
            } else {
              quantized_state_step(theta, g, obj, dual, &trace);
            }
            dir_momentum = trace.momentum.reshaped({cfg.dim});
            dir_precond = trace.preconditioned.reshaped({cfg.dim});
            break;
          }
          default:
            fl_adapted_step(theta, g, obj, fl, fl_kind(cfg.method),
                            cfg.forget_freq + cfg.retain_freq, params);
            fl_directions(fl, obj, params.eps, dir_momentum, dir_precond);
            break;
        }
      }
    } catch (const std::runtime_error&) {
      // A step rejected for producing non-finite values: the run diverged.
      report.diverged = true;
      break;
    }

    RunRow row;
    row.step = t;
    row.objective = obj;
    row.lr = lr;
    row.losses.reserve(n_obj);
    for (std::size_t k = 0; k < n_obj; ++k) {
      row.losses.push_back(task_loss(task, k, theta));
    }
    const bool finite = theta.all_finite() &&
                        std::all_of(row.losses.begin(), row.losses.end(),
                                    [](double x) { return std::isfinite(x); });
    report.rows.push_back(std::move(row));
    directions.push_back(StepDirections{t, obj, std::move(dir_momentum), std::move(dir_precond)});
    if (!finite) {
      report.diverged = true;
      break;
    }
  }

  if (cfg.method != Method::Joint && !directions.empty()) {
    try {
      const std::string base = method_name(cfg.method);
      report.traces.push_back(update_similarity(directions, base + "_momentum", false));
      report.traces.push_back(update_similarity(directions, base + "_precond", true));
    } catch (const std::invalid_argument&) {
      // Truncated or single-objective log: no similarity series.
    }
  }

  if (!report.rows.empty()) {
    report.final_losses = report.rows.back().losses;
  }
  report.params_digest = fnv1a64(theta.data(), theta.size() * sizeof(double));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<SweepOutcome> sweep(const std::vector<RunConfig>& grid) {
  if (grid.empty()) {
    throw std::invalid_argument("sweep: empty grid");
  }
  // Grid points run concurrently; each run is single-threaded and writes
  // only its own slot, so outcomes keep grid order and stay deterministic.
  std::vector<SweepOutcome> outcomes(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
      SweepOutcome& outcome = outcomes[i];
      try {
        outcome.report = run_experiment(grid[i]);
      } catch (const std::exception& e) {
        outcome.report.config = grid[i];
        outcome.report.config_echo = config_echo(grid[i]);
        outcome.report.diverged = true;
        outcome.failed = true;
        outcome.error = e.what();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), grid.size());
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return outcomes;
}

namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

// Post-burn-in mean of a trace, with the window shrunk for short runs; NaN
// when the series is absent or empty.
double summary_mean(const RunReport& report, std::size_t trace_index) {
  if (trace_index >= report.traces.size()) {
    return std::nan("");
  }
  const std::int64_t total = report.config.total_steps;
  const std::int64_t burn_in = std::min<std::int64_t>(200, total / 2);
  try {
    return mean_after_burn_in(report.traces[trace_index], burn_in);
  } catch (const std::invalid_argument&) {
    return std::nan("");
  }
}

}  // namespace

void write_report_csv(std::ostream& out, const RunReport& report) {
  const std::size_t n_obj = report.rows.empty() ? 2 : report.rows.front().losses.size();
  out << "step,objective,lr";
  if (n_obj >= 1) out << ",loss_forget";
  if (n_obj >= 2) out << ",loss_retain";
  for (std::size_t k = 2; k < n_obj; ++k) out << ",loss_" << k;
  out << '\n';
  for (const RunRow& row : report.rows) {
    out << row.step << ',' << row.objective << ',' << fmt17(row.lr);
    for (double loss : row.losses) out << ',' << fmt17(loss);
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SweepOutcome>& outcomes) {
  out << "method,task,forget_freq,retain_freq,beta1,beta2,base_beta1,base_beta2,"
         "base_update_timing,base_update_input,quantize_states,seed,"
         "final_loss_forget,final_loss_retain,mean_cos_momentum,mean_cos_precond,"
         "diverged,error\n";
  for (const SweepOutcome& o : outcomes) {
    const RunConfig& c = o.report.config;
    ConfigEntries echo = config_echo(c);
    auto value_of = [&echo](const char* key) -> std::string {
      for (const auto& [k, v] : echo) {
        if (k == key) return v;
      }
      return "";
    };
    const std::vector<double>& fin = o.report.final_losses;
    out << method_name(c.method) << ',' << value_of("task") << ',' << c.forget_freq << ','
        << c.retain_freq << ',' << fmt17(c.beta1) << ',' << fmt17(c.beta2) << ','
        << value_of("base_beta1") << ',' << value_of("base_beta2") << ','
        << value_of("base_update_timing") << ',' << value_of("base_update_input") << ','
        << value_of("quantize_states") << ',' << c.seed << ','
        << (fin.size() > 0 ? fmt17(fin[0]) : "") << ',' << (fin.size() > 1 ? fmt17(fin[1]) : "")
        << ',' << fmt17(summary_mean(o.report, 0)) << ',' << fmt17(summary_mean(o.report, 1))
        << ',' << (o.report.diverged ? 1 : 0) << ',' << csv_safe(o.error) << '\n';
  }
}

std::uint64_t RunReport::content_hash() const {
  std::ostringstream ss;
  ss << entries_to_text(config_echo);
  write_report_csv(ss, *this);
  write_similarity_csv(ss, traces);
  ss << "diverged=" << (diverged ? 1 : 0) << '\n';
  const std::string text = ss.str();
  std::uint64_t h = fnv1a64(text.data(), text.size());
  h = fnv1a64(&params_digest, sizeof params_digest, h);
  return h;
}

}  // namespace dualopt
