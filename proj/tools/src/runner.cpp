#include "ksentcli/runner.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "ksent/benettin.hpp"
#include "ksent/csv.hpp"
#include "ksent/kicked.hpp"
#include "ksent/quantum.hpp"
#include "ksent/riccati.hpp"
#include "ksent/sampler.hpp"
#include "ksent/systems.hpp"
#include "ksentcli/manifest.hpp"

namespace ksentcli {

namespace {

using nlohmann::json;

void ensure_out(const RunConfig& cfg) { std::filesystem::create_directories(cfg.out); }

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

void say(const RunConfig& cfg, const char* fmt, ...) {
  if (cfg.quiet) return;
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
}

json vec_json(const ksent::Vec& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

ksent::ModelParams model_params(const RunConfig& cfg) {
  ksent::ModelParams p;
  p.omega = cfg.omega;
  p.kick_strength = cfg.kick_strength;
  p.period = cfg.T > 0.0 ? cfg.T : 1.0;
  return p;
}

bool is_kicked_model(const std::string& name) {
  return name == "kicked-quartic" || name == "rotor";
}

/// Initial condition for continuous models: explicit or energy-surface.
ksent::TrajectoryState continuous_ic(const RunConfig& cfg, const ksent::HamiltonianModel& model) {
  if (!cfg.q0.empty()) {
    if (static_cast<int>(cfg.q0.size()) != model.dim)
      throw std::invalid_argument("q0 dimension does not match model '" + model.name + "' (" +
                                  std::to_string(model.dim) + ")");
    return {cfg.q0, cfg.p0, 0.0};
  }
  return ksent::sample_energy_surface(model, cfg.energy, cfg.seed);
}

/// Initial condition for kicked models: explicit, saddle, or scaled.
void kicked_ic(const RunConfig& cfg, const ksent::KickedModel& model, ksent::Vec& q0,
               ksent::Vec& p0) {
  if (!cfg.q0.empty()) {
    if (static_cast<int>(cfg.q0.size()) != model.dim)
      throw std::invalid_argument("q0 dimension does not match model '" + model.name + "' (" +
                                  std::to_string(model.dim) + ")");
    q0 = cfg.q0;
    p0 = cfg.p0;
    return;
  }
  if (cfg.ic == "saddle")
    ksent::sample_kicked_saddle(model, cfg.seed, q0, p0);
  else
    ksent::sample_kicked_ic(model, cfg.seed, cfg.f_scale, cfg.p_scale, q0, p0);
}

ksent::WaveState initial_wave(const RunConfig& cfg) {
  if (cfg.psi0 == "uniform") return ksent::uniform_state(cfg.grid, cfg.hbar);
  if (cfg.psi0 == "plane") return ksent::plane_wave(cfg.grid, cfg.hbar, cfg.psi0_wavenumber);
  return ksent::gaussian_state(cfg.grid, cfg.hbar, cfg.psi0_center, cfg.psi0_width);
}

}  // namespace

RunOutcome run_continuous(const RunConfig& cfg) {
  ensure_out(cfg);
  ManifestBuilder manifest(cfg);
  RunOutcome out;
  try {
    const ksent::HamiltonianModel model = ksent::make_model(cfg.model, model_params(cfg));
    const ksent::TrajectoryState xi0 = continuous_ic(cfg, model);

    ksent::RiccatiOptions opt;
    opt.dt = cfg.dt;
    opt.t_max = cfg.t_max;
    opt.sample_every = cfg.sample_every;
    opt.switch_threshold = cfg.switch_threshold;
    opt.hysteresis = cfg.hysteresis;
    opt.escape_bound = cfg.escape_bound;

    const ksent::KsEstimate est = ksent::evolve_ks(model, xi0, opt);

    {
      ksent::CsvWriter series(out_path(cfg, "series.csv"),
                              {"t", "k_running", "integrand", "energy_drift", "pole_count", "rep"});
      for (const auto& s : est.samples)
        series.row({s.t, s.k_running, s.integrand, s.energy_drift,
                    static_cast<double>(s.pole_count),
                    s.rep == ksent::SigmaRep::inverted ? 1.0 : 0.0});
      manifest.add_file("series.csv");
    }
    {
      ksent::CsvWriter poles(out_path(cfg, "poles.csv"), {"t", "direction", "sign"});
      for (const auto& p : est.poles)
        poles.row({p.t, static_cast<double>(p.direction), static_cast<double>(p.sign)});
      manifest.add_file("poles.csv");
    }
    {
      ksent::CsvWriter sw(out_path(cfg, "switches.csv"), {"t", "to_inverted"});
      for (const auto& s : est.switches)
        sw.row({s.t, s.to == ksent::SigmaRep::inverted ? 1.0 : 0.0});
      manifest.add_file("switches.csv");
    }

    out.results["model"] = cfg.model;
    out.results["q0"] = vec_json(xi0.q);
    out.results["p0"] = vec_json(xi0.p);
    out.results["k"] = est.k;
    out.results["k_window"] = est.k_window;
    out.results["integral"] = est.integral;
    out.results["elapsed"] = est.elapsed;
    out.results["energy_drift"] = est.energy_drift;
    out.results["pole_count"] = est.pole_count;
    out.results["n_switches"] = est.switches.size();
    if (est.failed) {
      out.results["error"] = est.error;
      out.exit_code = 3;
    }
    manifest.set_status(!est.failed, est.error);
    int total_poles = 0;
    for (int c : est.pole_count) total_poles += c;
    say(cfg, "continuous %s: k = %.6g (window %.6g) over t = %.6g, %d poles%s", cfg.model.c_str(),
        est.k, est.k_window, est.elapsed, total_poles, est.failed ? "  [partial]" : "");
  } catch (const std::exception& ex) {
    manifest.set_status(false, ex.what());
    out.results["error"] = ex.what();
    out.exit_code = 3;
    say(cfg, "continuous run failed: %s", ex.what());
  }
  manifest.set_results(out.results);
  manifest.write();
  return out;
}

RunOutcome run_kicked(const RunConfig& cfg) {
  ensure_out(cfg);
  ManifestBuilder manifest(cfg);
  RunOutcome out;
  try {
    const ksent::KickedModel model = ksent::make_kicked_model(cfg.model, model_params(cfg));
    ksent::Vec q0, p0;
    kicked_ic(cfg, model, q0, p0);

    ksent::KickedOptions opt;
    opt.n_steps = cfg.n_steps;
    opt.sample_every = cfg.sample_every > 0.0 ? static_cast<long>(cfg.sample_every) : 0;
    opt.escape_bound = cfg.escape_bound;

    const ksent::KickedEstimate est = ksent::run_kicked(model, q0, p0, opt);

    {
      ksent::CsvWriter series(out_path(cfg, "series.csv"),
                              {"n", "t", "k_running", "log_det_increment"});
      for (const auto& s : est.samples)
        series.row({static_cast<double>(s.n), s.t, s.k_running, s.log_det_increment});
      manifest.add_file("series.csv");
    }

    out.results["model"] = cfg.model;
    out.results["q0"] = vec_json(q0);
    out.results["p0"] = vec_json(p0);
    out.results["k"] = est.k;
    out.results["k_window"] = est.k_window;
    out.results["ks_sum"] = est.ks_sum;
    out.results["n_steps"] = est.n_steps;
    out.results["det_sign_flips"] = est.det_sign_flips;
    if (est.failed) {
      out.results["error"] = est.error;
      out.exit_code = 3;
    }
    manifest.set_status(!est.failed, est.error);
    say(cfg, "kicked %s: k = %.6g (window %.6g) over %ld steps%s", cfg.model.c_str(), est.k,
        est.k_window, est.n_steps, est.failed ? "  [partial]" : "");
  } catch (const std::exception& ex) {
    manifest.set_status(false, ex.what());
    out.results["error"] = ex.what();
    out.exit_code = 3;
    say(cfg, "kicked run failed: %s", ex.what());
  }
  manifest.set_results(out.results);
  manifest.write();
  return out;
}

RunOutcome run_oracle(const RunConfig& cfg) {
  ensure_out(cfg);
  ManifestBuilder manifest(cfg);
  RunOutcome out;
  try {
    ksent::SpectrumResult est;
    if (is_kicked_model(cfg.model)) {
      const ksent::KickedModel model = ksent::make_kicked_model(cfg.model, model_params(cfg));
      ksent::Vec q0, p0;
      kicked_ic(cfg, model, q0, p0);
      ksent::KickedBenettinOptions opt;
      opt.n_steps = cfg.n_steps;
      opt.sample_every = cfg.sample_every > 0.0 ? static_cast<long>(cfg.sample_every) : 0;
      opt.escape_bound = cfg.escape_bound;
      est = ksent::spectrum_kicked(model, q0, p0, opt);
      out.results["q0"] = vec_json(q0);
      out.results["p0"] = vec_json(p0);
    } else {
      const ksent::HamiltonianModel model = ksent::make_model(cfg.model, model_params(cfg));
      const ksent::TrajectoryState xi0 = continuous_ic(cfg, model);
      ksent::BenettinOptions opt;
      opt.t_max = cfg.t_max;
      opt.dt = cfg.dt;
      opt.renorm_interval = cfg.renorm_interval;
      opt.sample_every = cfg.sample_every;
      opt.escape_bound = cfg.escape_bound;
      est = ksent::spectrum_continuous(model, xi0, opt);
      out.results["q0"] = vec_json(xi0.q);
      out.results["p0"] = vec_json(xi0.p);
    }

    {
      ksent::CsvWriter spec(out_path(cfg, "spectrum.csv"), {"index", "exponent"});
      for (size_t i = 0; i < est.exponents.size(); ++i)
        spec.row({static_cast<double>(i), est.exponents[i]});
      manifest.add_file("spectrum.csv");
    }
    if (!est.samples.empty()) {
      std::vector<std::string> cols = {"t", "k_oracle"};
      for (size_t i = 0; i < est.exponents.size(); ++i) cols.push_back("exp" + std::to_string(i));
      ksent::CsvWriter series(out_path(cfg, "series.csv"), cols);
      for (const auto& s : est.samples) {
        std::vector<double> row = {s.t, s.k_oracle};
        row.insert(row.end(), s.exponents.begin(), s.exponents.end());
        series.row(row);
      }
      manifest.add_file("series.csv");
    }

    out.results["model"] = cfg.model;
    out.results["exponents"] = vec_json(est.exponents);
    out.results["k_oracle"] = est.k_oracle;
    out.results["k_stderr"] = est.k_stderr;
    out.results["elapsed"] = est.elapsed;
    out.results["renorms"] = est.renorms;
    if (est.failed) {
      out.results["error"] = est.error;
      out.exit_code = 3;
    }
    manifest.set_status(!est.failed, est.error);
    say(cfg, "oracle %s: k = %.6g +- %.2g%s", cfg.model.c_str(), est.k_oracle, est.k_stderr,
        est.failed ? "  [partial]" : "");
  } catch (const std::exception& ex) {
    manifest.set_status(false, ex.what());
    out.results["error"] = ex.what();
    out.exit_code = 3;
    say(cfg, "oracle run failed: %s", ex.what());
  }
  manifest.set_results(out.results);
  manifest.write();
  return out;
}

RunOutcome run_rotor_quantum(const RunConfig& cfg) {
  ensure_out(cfg);
  ManifestBuilder manifest(cfg);
  RunOutcome out;
  try {
    ksent::RotorRunRequest req;
    req.params.kick_strength = cfg.K;
    req.params.period = cfg.T > 0.0 ? cfg.T : 1.0;
    req.params.hbar = cfg.hbar;
    req.params.grid = cfg.grid;
    req.params.substeps = cfg.substeps;
    req.psi0 = initial_wave(cfg);
    req.n_periods = cfg.n_periods;
    req.mb_starts = ksent::sample_positions(req.psi0, cfg.mb_orbits, cfg.seed);
    req.classical_starts = {{cfg.classical_q0, cfg.classical_p0}};
    req.entropy_every = cfg.entropy_every;
    req.trace.rtol = cfg.rtol;
    req.trace.atol = cfg.rtol / 10.0;
    if (cfg.record) req.record_path = out_path(cfg, "record.bin");

    const ksent::RotorRunResult res = ksent::run_rotor(req);

    json orbits = json::array();
    int usable = 0;
    for (size_t i = 0; i < res.orbits.size(); ++i) {
      const ksent::MbOrbit& o = res.orbits[i];
      const std::string name = "orbit_" + std::to_string(i) + ".csv";
      ksent::CsvWriter oc(out_path(cfg, name),
                          {"t", "q", "q_unwrapped", "lap_s", "logdens", "node"});
      for (size_t j = 0; j < o.times.size(); ++j)
        oc.row({o.times[j], o.q[j], o.q_unwrapped[j], o.lap_s[j], o.logdens[j],
                o.node_flags[j] ? 1.0 : 0.0});
      manifest.add_file(name);

      json jo;
      jo["q0"] = req.mb_starts[i];
      jo["aborted"] = o.aborted;
      if (o.aborted) jo["abort_time"] = o.abort_time;
      try {
        jo["k_mb"] = ksent::quantum_ks(o, req.params.period);
        jo["k_density"] = ksent::density_decay_ks(o);
        ++usable;
      } catch (const std::exception& ex) {
        jo["estimate_error"] = ex.what();
      }
      orbits.push_back(std::move(jo));
    }

    {
      ksent::CsvWriter rc(out_path(cfg, "run.csv"),
                          {"t", "entropy", "kbar_slope", "kbar_over_t"});
      for (size_t i = 0; i < res.entropy.t.size(); ++i)
        rc.row({res.entropy.t[i], res.entropy.entropy[i], res.entropy.kbar_slope[i],
                res.entropy.kbar_over_t[i]});
      manifest.add_file("run.csv");
    }
    if (cfg.record) manifest.add_file("record.bin");

    const ksent::HybridEstimate& h = res.hybrid.front();
    json jh;
    jh["k"] = h.k;
    jh["first_half"] = h.first_half;
    jh["second_half"] = h.second_half;
    jh["masked_fraction"] = h.masked_fraction;
    jh["low_confidence"] = h.low_confidence;

    out.results["orbits"] = std::move(orbits);
    out.results["hybrid"] = std::move(jh);
    out.results["norm_drift"] = res.norm_drift;
    out.results["entropy_growth_rate"] = res.entropy.growth_rate;
    out.results["kbar_slope"] =
        res.entropy.kbar_slope.empty() ? 0.0 : res.entropy.kbar_slope.back();

    const bool ok = usable > 0 || res.orbits.empty();
    if (!ok) {
      out.results["error"] = "no MB orbit produced a usable estimate";
      out.exit_code = 3;
    }
    manifest.set_status(ok, ok ? "" : "no MB orbit produced a usable estimate");
    say(cfg, "rotor-quantum: %d/%zu orbits usable, hybrid k = %.4g, norm drift %.2e", usable,
        res.orbits.size(), h.k, res.norm_drift);
  } catch (const std::exception& ex) {
    manifest.set_status(false, ex.what());
    out.results["error"] = ex.what();
    out.exit_code = 3;
    say(cfg, "rotor-quantum run failed: %s", ex.what());
  }
  manifest.set_results(out.results);
  manifest.write();
  return out;
}

int dispatch(const RunConfig& cfg) {
  if (cfg.engine == "continuous") return run_continuous(cfg).exit_code;
  if (cfg.engine == "kicked") return run_kicked(cfg).exit_code;
  if (cfg.engine == "oracle") return run_oracle(cfg).exit_code;
  if (cfg.engine == "rotor-quantum") return run_rotor_quantum(cfg).exit_code;
  if (cfg.engine == "bench") return run_bench(cfg).exit_code;
  std::fprintf(stderr, "unknown engine '%s'\n", cfg.engine.c_str());
  return 2;
}

}  // namespace ksentcli
