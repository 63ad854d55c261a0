// tfr: Tully-Fisher relation inference pipeline.
//
// Subcommands: simulate, fit, debias, anchor, plotdata.  Exit codes:
// 0 ok, 2 config/input error, 3 non-convergence, 4 degenerate result.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tfr/bias.hpp"
#include "tfr/config.hpp"
#include "tfr/debias.hpp"
#include "tfr/io.hpp"
#include "tfr/likelihood.hpp"
#include "tfr/sampler.hpp"
#include "tfr/simulator.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void write_provenance(const fs::path& dir, const std::string& command,
                      const tfr::RunConfig& cfg, double wall_s,
                      const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  j["artifact_version"] = kVersion;
  j["config"] = ordered_json::parse(cfg.resolved_json());
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["wall_time_s"] = wall_s;
  j["outputs"] = outputs;
  std::ofstream out(dir / ("provenance_" + command + ".json"));
  out << j.dump(2) << '\n';
}

tfr::RunConfig load_config_or_die(const std::string& path) {
  if (!fs::exists(path)) {
    std::cerr << "error: config file not found: " << path << "\n";
    std::exit(2);
  }
  try {
    return tfr::load_run_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::exit(2);
  }
}

struct FitArtifacts {
  tfr::Chain chain;
  std::vector<tfr::ParamSummary> summary;
  std::vector<std::string> names;
};

FitArtifacts run_fit(const std::vector<tfr::GalaxyRecord>& records, tfr::ModelKind kind,
                     const tfr::RunConfig& cfg) {
  auto ctx = tfr::LikelihoodContext::build(records, cfg.selection, kind, cfg.fit.grid_nodes,
                                           cfg.threads);
  auto logpost = [&ctx, kind](std::span<const double> theta) {
    return tfr::log_likelihood(ctx, tfr::unpack_params(kind, theta));
  };
  tfr::EnsembleOptions opts;
  opts.seed = cfg.seed;
  opts.n_walkers = cfg.fit.n_walkers;
  opts.step_cap = cfg.fit.step_cap;
  opts.check_every = cfg.fit.check_every;
  FitArtifacts art;
  art.names = tfr::param_names(kind);
  art.chain = tfr::ensemble_run(logpost, cfg.fit.bounds_for(kind), opts);
  art.summary = tfr::summarize(art.chain, /*allow_nonconverged=*/true);
  return art;
}

void write_fit_outputs(const fs::path& dir, const std::string& stem, const FitArtifacts& art,
                       const std::string& model, std::size_t n_records,
                       std::vector<std::string>& outputs) {
  fs::path chain_csv = dir / (stem + "_chain.csv");
  fs::path meta_json = dir / (stem + "_chain.meta.json");
  fs::path summary_json = dir / (stem + "_summary.json");
  tfr::write_chain_csv(chain_csv.string(), art.chain, art.names);
  tfr::write_chain_meta_json(meta_json.string(), art.chain, art.names, model);

  ordered_json j;
  j["model"] = model;
  j["n_records"] = n_records;
  j["converged"] = art.chain.converged;
  ordered_json params = ordered_json::object();
  for (std::size_t p = 0; p < art.names.size(); ++p) {
    params[art.names[p]] = ordered_json{{"p16", art.summary[p].p16},
                                        {"p50", art.summary[p].p50},
                                        {"p84", art.summary[p].p84}};
  }
  j["params"] = params;
  j["tau"] = art.chain.tau;
  double acc = 0.0;
  for (double a : art.chain.acceptance_fraction) acc += a;
  j["mean_acceptance"] = acc / art.chain.acceptance_fraction.size();
  j["n_retained"] = art.chain.retained().size();
  std::ofstream out(summary_json);
  out << j.dump(2) << '\n';

  outputs.push_back(chain_csv.string());
  outputs.push_back(meta_json.string());
  outputs.push_back(summary_json.string());
}

ordered_json read_json_or_die(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(2);
  }
  try {
    ordered_json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    std::cerr << "error: bad JSON in " << path << ": " << e.what() << "\n";
    std::exit(2);
  }
}

tfr::FitSummary summary_from_json(const ordered_json& j, tfr::FitModelTag tag) {
  tfr::FitSummary s;
  s.model_tag = tag;
  const auto& p = j.at("params");
  s.beta_hat = p.at("beta").at("p50").get<double>();
  s.gamma_hat = p.at("gamma").at("p50").get<double>();
  s.beta_err = 0.5 * (p.at("beta").at("p84").get<double>() - p.at("beta").at("p16").get<double>());
  s.gamma_err =
      0.5 * (p.at("gamma").at("p84").get<double>() - p.at("gamma").at("p16").get<double>());
  return s;
}

// chain CSV + meta loader for plotdata
struct LoadedChain {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;  // params + log_post
};

LoadedChain load_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open chain " << path << "\n";
    std::exit(2);
  }
  LoadedChain c;
  std::string line;
  if (!std::getline(in, line)) {
    std::cerr << "error: empty chain file " << path << "\n";
    std::exit(2);
  }
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) c.names.push_back(tok);
  if (c.names.empty() || c.names.back() != "log_post") {
    std::cerr << "error: chain header must end in log_post: " << path << "\n";
    std::exit(2);
  }
  c.names.pop_back();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (row.size() != c.names.size() + 1) {
      std::cerr << "error: ragged chain row in " << path << "\n";
      std::exit(2);
    }
    c.rows.push_back(std::move(row));
  }
  return c;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed_flag,
                 std::string out_dir, std::optional<std::size_t> tune_target) {
  Timer timer;
  tfr::RunConfig cfg = load_config_or_die(config_path);
  if (!cfg.simulate) {
    std::cerr << "error: config has no 'simulate' section: " << config_path << "\n";
    return 2;
  }
  if (seed_flag) {
    cfg.seed = *seed_flag;
    cfg.simulate->seed = *seed_flag;
  }
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  fs::create_directories(cfg.output_dir);

  try {
    if (tune_target) {
      double a = tfr::tune_scale_a(*cfg.simulate, *tune_target);
      cfg.simulate->scale_a = a;
      std::cout << "tuned scale_a = " << tfr::format_double(a) << "\n";
    }
    tfr::MockCatalog cat = tfr::simulate(*cfg.simulate);
    fs::path dir(cfg.output_dir);
    fs::path csv = dir / "catalog.csv";
    fs::path sidecar = dir / "catalog.truth.json";
    tfr::write_catalog_csv(csv.string(), cat.records);
    tfr::write_sim_sidecar_json(sidecar.string(), cat);
    write_provenance(dir, "simulate", cfg, timer.seconds(), {csv.string(), sidecar.string()});
    std::cout << "simulated " << cat.records.size() << " records ("
              << cat.pre_selection_count << " before selection) -> " << csv.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_fit(const std::string& catalog_path, const std::string& model_name,
            const std::string& config_path, std::optional<std::uint64_t> seed_flag,
            std::optional<int> threads_flag, std::optional<int> grid_nodes_flag,
            bool allow_nonconverged, std::string out_dir) {
  Timer timer;
  auto kind = tfr::model_kind_from_string(model_name);
  if (!kind) {
    std::cerr << "error: unknown model '" << model_name
              << "'; valid kinds: forward, inverse, dual\n";
    return 2;
  }
  tfr::RunConfig cfg = config_path.empty() ? tfr::RunConfig{} : load_config_or_die(config_path);
  if (seed_flag) cfg.seed = *seed_flag;
  if (threads_flag) cfg.threads = *threads_flag;
  if (grid_nodes_flag) cfg.fit.grid_nodes = *grid_nodes_flag;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  fs::create_directories(cfg.output_dir);

  try {
    auto records = tfr::read_catalog_csv(catalog_path, cfg.cosmology);
    FitArtifacts art = run_fit(records, *kind, cfg);
    std::vector<std::string> outputs;
    write_fit_outputs(cfg.output_dir, to_string(*kind), art, to_string(*kind), records.size(),
                      outputs);
    write_provenance(cfg.output_dir, "fit_" + to_string(*kind), cfg, timer.seconds(), outputs);
    for (std::size_t p = 0; p < art.names.size(); ++p)
      std::cout << art.names[p] << " = " << art.summary[p].p50 << " (+"
                << art.summary[p].p84 - art.summary[p].p50 << " / -"
                << art.summary[p].p50 - art.summary[p].p16 << ")\n";
    if (!art.chain.converged) {
      std::cerr << (allow_nonconverged ? "warning" : "error")
                << ": chain did not reach the retained-length criterion\n";
      if (!allow_nonconverged) return 3;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_debias(const std::string& catalog_path, const std::string& forward_summary_path,
               const std::string& inverse_summary_path, double sigma_m,
               const std::string& config_path, std::optional<std::uint64_t> seed_flag,
               std::optional<int> threads_flag, std::string out_dir) {
  Timer timer;
  if (sigma_m < 0.0) {
    std::cerr << "error: sigma_m must be >= 0\n";
    return 2;
  }
  tfr::RunConfig cfg = config_path.empty() ? tfr::RunConfig{} : load_config_or_die(config_path);
  if (seed_flag) cfg.seed = *seed_flag;
  if (threads_flag) cfg.threads = *threads_flag;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  fs::create_directories(cfg.output_dir);

  try {
    auto records = tfr::read_catalog_csv(catalog_path, cfg.cosmology);
    ordered_json fj = read_json_or_die(forward_summary_path);
    ordered_json ij = read_json_or_die(inverse_summary_path);

    tfr::MomentShiftInputs inputs;
    inputs.inverse_fit = summary_from_json(ij, tfr::FitModelTag::Inverse);
    inputs.v_star = fj.at("params").at("v_star").at("p50").get<double>();
    inputs.alpha = fj.at("params").at("alpha").at("p50").get<double>();
    inputs.sigma_m_upper = fj.at("params").at("sigma_m").at("p50").get<double>();

    tfr::InverseRefitConfig rc;
    rc.bounds = cfg.fit.bounds_for(tfr::ModelKind::Inverse);
    rc.ensemble.seed = cfg.seed;
    rc.ensemble.n_walkers = cfg.fit.n_walkers;
    rc.ensemble.step_cap = cfg.fit.step_cap;
    rc.ensemble.check_every = cfg.fit.check_every;
    rc.selection = cfg.selection;
    rc.threads = cfg.threads;

    tfr::MomentShiftOptions opts;
    opts.tol = cfg.debias.tol;
    opts.max_iterations = cfg.debias.max_iterations;
    auto [fit, state] = tfr::moment_shift_fit(records, sigma_m, inputs,
                                              tfr::make_mcmc_inverse_fitter(rc), opts);

    fs::path dir(cfg.output_dir);
    fs::path widths_csv = dir / "corrected_widths.csv";
    {
      auto corrected = records;
      for (std::size_t k = 0; k < corrected.size(); ++k)
        corrected[k].w_tilde = state.corrected_widths[k];
      tfr::write_catalog_csv(widths_csv.string(), corrected);
    }
    fs::path hist_csv = dir / "debias_history.csv";
    {
      std::ofstream h(hist_csv);
      h << "iteration,beta,gamma\n";
      for (std::size_t k = 0; k < state.history.size(); ++k)
        h << k << ',' << tfr::format_double(state.history[k].first) << ','
          << tfr::format_double(state.history[k].second) << '\n';
    }
    fs::path final_json = dir / "debias_summary.json";
    {
      ordered_json j;
      j["model"] = "inverse+moment-shift";
      j["sigma_m_user"] = sigma_m;
      j["iterations"] = state.iteration;
      j["converged"] = state.converged;
      j["oscillating"] = state.oscillating;
      if (!state.diagnostics.empty()) j["diagnostics"] = state.diagnostics;
      j["params"] = ordered_json{
          {"beta", ordered_json{{"p16", fit.beta_hat - fit.beta_err},
                                {"p50", fit.beta_hat},
                                {"p84", fit.beta_hat + fit.beta_err}}},
          {"gamma", ordered_json{{"p16", fit.gamma_hat - fit.gamma_err},
                                 {"p50", fit.gamma_hat},
                                 {"p84", fit.gamma_hat + fit.gamma_err}}}};
      std::ofstream out(final_json);
      out << j.dump(2) << '\n';
    }
    write_provenance(dir, "debias", cfg, timer.seconds(),
                     {widths_csv.string(), hist_csv.string(), final_json.string()});
    std::cout << "moment shift: " << state.iteration << " iterations, beta = " << fit.beta_hat
              << ", gamma = " << fit.gamma_hat << (state.converged ? "" : " [not converged]")
              << "\n";
    return state.converged ? 0 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cmd_anchor(const std::string& forward_summary_path, const std::string& inverse_summary_path,
               std::string out_dir) {
  ordered_json fj = read_json_or_die(forward_summary_path);
  ordered_json ij = read_json_or_die(inverse_summary_path);
  tfr::FitSummary fwd = summary_from_json(fj, tfr::FitModelTag::Forward);
  tfr::FitSummary inv = summary_from_json(ij, tfr::FitModelTag::Inverse);
  auto anchor = tfr::unbiased_anchor(fwd, inv);
  if (!anchor) {
    std::cerr << "error: degenerate anchor (equal slopes)\n";
    return 4;
  }
  ordered_json j;
  j["logV0"] = anchor->logV0;
  j["gamma0"] = anchor->gamma0;
  j["forward"] = ordered_json{{"beta", fwd.beta_hat}, {"gamma", fwd.gamma_hat}};
  j["inverse"] = ordered_json{{"beta", inv.beta_hat}, {"gamma", inv.gamma_hat}};
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  fs::path path = fs::path(out_dir) / "anchor.json";
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  std::cout << "logV0 = " << anchor->logV0 << ", gamma0 = " << anchor->gamma0 << " -> "
            << path.string() << "\n";
  return 0;
}

int cmd_plotdata(const std::string& chain_path, const std::string& kind,
                 const std::string& catalog_path, std::string out_dir) {
  if (kind != "corner" && kind != "trace" && kind != "tfr-overlay") {
    std::cerr << "error: unknown plotdata kind '" << kind
              << "'; valid kinds: corner, trace, tfr-overlay\n";
    return 2;
  }
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  fs::path dir(out_dir);

  if (kind == "tfr-overlay") {
    if (catalog_path.empty()) {
      std::cerr << "error: tfr-overlay needs --catalog\n";
      return 2;
    }
    LoadedChain chain = load_chain_csv(chain_path);
    tfr::RunConfig defaults;
    auto records = tfr::read_catalog_csv(catalog_path, defaults.cosmology);
    // medians of beta/gamma
    auto col = [&](const std::string& name) {
      auto it = std::find(chain.names.begin(), chain.names.end(), name);
      if (it == chain.names.end()) {
        std::cerr << "error: chain lacks parameter " << name << "\n";
        std::exit(2);
      }
      std::vector<double> v(chain.rows.size());
      for (std::size_t r = 0; r < chain.rows.size(); ++r)
        v[r] = chain.rows[r][static_cast<std::size_t>(it - chain.names.begin())];
      return v;
    };
    double beta = tfr::percentile(col("beta"), 50.0);
    double gamma = tfr::percentile(col("gamma"), 50.0);
    std::ofstream data(dir / "overlay_data.csv");
    data << "w_tilde,m_plus_d\n";
    double w_min = 1e30, w_max = -1e30;
    for (const auto& r : records) {
      data << tfr::format_double(r.w_tilde) << ',' << tfr::format_double(r.m_tilde + r.d) << '\n';
      w_min = std::min(w_min, r.w_tilde);
      w_max = std::max(w_max, r.w_tilde);
    }
    std::ofstream model(dir / "overlay_model.csv");
    model << "w,m_plus_d\n";
    for (int k = 0; k <= 100; ++k) {
      double w = w_min + (w_max - w_min) * k / 100.0;
      model << tfr::format_double(w) << ',' << tfr::format_double(beta * w + gamma) << '\n';
    }
    std::cout << "wrote overlay_data.csv, overlay_model.csv\n";
    return 0;
  }

  LoadedChain chain = load_chain_csv(chain_path);
  std::size_t n_params = chain.names.size();

  if (kind == "trace") {
    // Retained samples ordered walker-major in the CSV; re-emit with indices.
    std::ofstream out(dir / "trace.csv");
    out << "row";
    for (const auto& n : chain.names) out << ',' << n;
    out << ",log_post\n";
    for (std::size_t r = 0; r < chain.rows.size(); ++r) {
      out << r;
      for (double v : chain.rows[r]) out << ',' << tfr::format_double(v);
      out << '\n';
    }
    std::cout << "wrote trace.csv (" << chain.rows.size() << " rows)\n";
    return 0;
  }

  // corner: marginal histograms and pairwise 2-D histograms with 68/95 levels
  constexpr int kBins = 48;
  auto minmax = [&](std::size_t p) {
    double lo = 1e300, hi = -1e300;
    for (const auto& row : chain.rows) {
      lo = std::min(lo, row[p]);
      hi = std::max(hi, row[p]);
    }
    double pad = (hi - lo) * 1e-9 + 1e-300;
    return std::pair<double, double>(lo, hi + pad);
  };
  for (std::size_t p = 0; p < n_params; ++p) {
    auto [lo, hi] = minmax(p);
    std::vector<std::size_t> hist(kBins, 0);
    for (const auto& row : chain.rows) {
      int b = static_cast<int>((row[p] - lo) / (hi - lo) * kBins);
      b = std::clamp(b, 0, kBins - 1);
      ++hist[static_cast<std::size_t>(b)];
    }
    std::ofstream out(dir / ("marginal_" + chain.names[p] + ".csv"));
    out << "bin_lo,bin_hi,count\n";
    for (int b = 0; b < kBins; ++b)
      out << tfr::format_double(lo + (hi - lo) * b / kBins) << ','
          << tfr::format_double(lo + (hi - lo) * (b + 1) / kBins) << ',' << hist[b] << '\n';
  }
  std::ofstream levels(dir / "corner_levels.csv");
  levels << "x,y,level68,level95\n";
  for (std::size_t px = 0; px < n_params; ++px) {
    for (std::size_t py = px + 1; py < n_params; ++py) {
      auto [xlo, xhi] = minmax(px);
      auto [ylo, yhi] = minmax(py);
      std::vector<std::size_t> hist(kBins * kBins, 0);
      for (const auto& row : chain.rows) {
        int bx = std::clamp(static_cast<int>((row[px] - xlo) / (xhi - xlo) * kBins), 0, kBins - 1);
        int by = std::clamp(static_cast<int>((row[py] - ylo) / (yhi - ylo) * kBins), 0, kBins - 1);
        ++hist[static_cast<std::size_t>(by * kBins + bx)];
      }
      std::ofstream out(dir / ("corner_" + chain.names[px] + "_" + chain.names[py] + ".csv"));
      out << "x_lo,x_hi,y_lo,y_hi,count\n";
      for (int by = 0; by < kBins; ++by)
        for (int bx = 0; bx < kBins; ++bx)
          out << tfr::format_double(xlo + (xhi - xlo) * bx / kBins) << ','
              << tfr::format_double(xlo + (xhi - xlo) * (bx + 1) / kBins) << ','
              << tfr::format_double(ylo + (yhi - ylo) * by / kBins) << ','
              << tfr::format_double(ylo + (yhi - ylo) * (by + 1) / kBins) << ','
              << hist[static_cast<std::size_t>(by * kBins + bx)] << '\n';
      // descending-count threshold enclosing 68% / 95% of samples
      std::vector<std::size_t> sorted = hist;
      std::sort(sorted.rbegin(), sorted.rend());
      std::size_t total = chain.rows.size();
      auto level_for = [&](double frac) -> std::size_t {
        std::size_t acc = 0;
        for (std::size_t c : sorted) {
          acc += c;
          if (static_cast<double>(acc) >= frac * static_cast<double>(total)) return c;
        }
        return sorted.empty() ? 0 : sorted.back();
      };
      levels << chain.names[px] << ',' << chain.names[py] << ',' << level_for(0.68) << ','
             << level_for(0.95) << '\n';
    }
  }
  std::cout << "wrote corner histograms for " << n_params << " parameters\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tully-Fisher relation inference with latent inclinations"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, catalog_path, model_name, out_dir;
  std::string forward_summary, inverse_summary, chain_path, plot_kind;
  double sigma_m = 0.0;
  bool allow_nonconverged = false;
  std::optional<std::uint64_t> seed_flag;
  std::optional<int> threads_flag, grid_nodes_flag;
  std::optional<std::size_t> tune_target;

  std::uint64_t seed_val = 0;
  int threads_val = 0, grid_nodes_val = 0;
  std::size_t tune_val = 0;

  auto* sim = app.add_subcommand("simulate", "generate a mock flux-limited catalog");
  sim->add_option("--config", config_path, "run config JSON")->required();
  auto* sim_seed = sim->add_option("--seed", seed_val, "override the config seed");
  sim->add_option("--out", out_dir, "output directory");
  auto* sim_tune = sim->add_option("--tune-count", tune_val,
                                   "retune scale_a to hit this survivor count first");

  auto* fit = app.add_subcommand("fit", "fit a model to a catalog");
  fit->add_option("--catalog", catalog_path, "catalog CSV")->required();
  fit->add_option("--model", model_name, "forward | inverse | dual")->required();
  fit->add_option("--config", config_path, "run config JSON");
  auto* fit_seed = fit->add_option("--seed", seed_val, "sampler seed");
  auto* fit_threads = fit->add_option("--threads", threads_val, "thread budget");
  auto* fit_nodes = fit->add_option("--grid-nodes", grid_nodes_val, "quadrature nodes (power of 2)");
  fit->add_flag("--allow-nonconverged", allow_nonconverged, "exit 0 even without convergence");
  fit->add_option("--out", out_dir, "output directory");

  auto* deb = app.add_subcommand("debias", "iterative moment-shifting on the inverse model");
  deb->add_option("--catalog", catalog_path, "catalog CSV")->required();
  deb->add_option("--forward-summary", forward_summary, "forward fit summary JSON")->required();
  deb->add_option("--inverse-summary", inverse_summary, "inverse fit summary JSON")->required();
  deb->add_option("--sigma-m", sigma_m, "prescribed mass scatter, dex")->required();
  deb->add_option("--config", config_path, "run config JSON");
  auto* deb_seed = deb->add_option("--seed", seed_val, "sampler seed");
  auto* deb_threads = deb->add_option("--threads", threads_val, "thread budget");
  deb->add_option("--out", out_dir, "output directory");

  auto* anc = app.add_subcommand("anchor", "unbiased anchor from forward+inverse fits");
  anc->add_option("--forward-summary", forward_summary, "forward fit summary JSON")->required();
  anc->add_option("--inverse-summary", inverse_summary, "inverse fit summary JSON")->required();
  anc->add_option("--out", out_dir, "output directory");

  auto* plot = app.add_subcommand("plotdata", "emit CSV bundles for plots");
  plot->add_option("--chain", chain_path, "chain CSV")->required();
  plot->add_option("--kind", plot_kind, "corner | trace | tfr-overlay")->required();
  plot->add_option("--catalog", catalog_path, "catalog CSV (tfr-overlay)");
  plot->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  if (sim_seed->count() || fit_seed->count() || deb_seed->count()) seed_flag = seed_val;
  if (fit_threads->count() || deb_threads->count()) threads_flag = threads_val;
  if (fit_nodes->count()) grid_nodes_flag = grid_nodes_val;
  if (sim_tune->count()) tune_target = tune_val;

  if (app.got_subcommand(sim))
    return cmd_simulate(config_path, seed_flag, out_dir, tune_target);
  if (app.got_subcommand(fit))
    return cmd_fit(catalog_path, model_name, config_path, seed_flag, threads_flag,
                   grid_nodes_flag, allow_nonconverged, out_dir);
  if (app.got_subcommand(deb))
    return cmd_debias(catalog_path, forward_summary, inverse_summary, sigma_m, config_path,
                      seed_flag, threads_flag, out_dir);
  if (app.got_subcommand(anc)) return cmd_anchor(forward_summary, inverse_summary, out_dir);
  if (app.got_subcommand(plot)) return cmd_plotdata(chain_path, plot_kind, catalog_path, out_dir);
  return 2;
}
