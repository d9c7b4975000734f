// npi: simulate, fit and evaluate NPI effectiveness models.
//
// Exit codes: 0 success, 1 error (a JSON error object is printed to stderr),
// 2 usage error, 3 the fit finished but failed the convergence gate.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "npi/harness.hpp"
#include "npi/inference.hpp"
#include "npi/io.hpp"
#include "npi/mle.hpp"
#include "npi/report.hpp"
#include "npi/simgen.hpp"
#include "npi/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitQuality = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, samples;
  std::optional<std::string> out, variant, npis_path, counts_path;
  std::string grid_categories;
};

npi::RunConfig resolve(const Options& o) {
  npi::RunConfig rc = o.config.empty() ? npi::parse_run_config("{}") : npi::load_run_config(o.config);
  if (o.variant) {
    rc.model.variant = npi::variant_by_name(*o.variant);
    rc.model.priors.alpha_prior = npi::ModelConfig::for_variant(*o.variant).priors.alpha_prior;
  }
  if (o.seed) rc.fit.seed = *o.seed;
  if (o.chains) rc.fit.chains = *o.chains;
  if (o.samples) rc.fit.sampler.samples = *o.samples;
  if (o.out) rc.out_dir = *o.out;
  if (o.npis_path) rc.npis_path = *o.npis_path;
  if (o.counts_path) rc.counts_path = *o.counts_path;
  if (!o.grid_categories.empty()) {
    rc.sensitivity.categories.clear();
    std::stringstream ss(o.grid_categories);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) rc.sensitivity.categories.push_back(item);
  }
  rc.model.validate();
  for (const auto& c : rc.sensitivity.categories) (void)npi::sensitivity_category_by_name(c);
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void emit(const fs::path& dir, const npi::FitReport& report) {
  write_text(dir / "report.txt", npi::report_text(report));
  write_text(dir / "report.json", npi::report_json(report).dump(2) + "\n");
  std::cout << npi::report_text(report);
}

/// Ingested, masked data restricted to the configured NPI columns.
struct Data {
  npi::NpiPanel panel;
  npi::CountData counts;
  std::vector<std::string> warnings;
};

Data load(const npi::RunConfig& rc) {
  if (rc.npis_path.empty() || rc.counts_path.empty())
    throw npi::ConfigError("paths.npis and paths.counts (or --npis/--counts) are required");
  auto in = npi::ingest(rc.npis_path, rc.counts_path, {.cumulative = rc.cumulative});
  npi::ExperimentSpec spec;
  spec.config = rc.model;
  spec.rules = rc.mask;
  spec.countries = in.counts.countries;
  spec.npis = rc.npis.empty() ? in.panel.npi_names : rc.npis;
  auto prepared = npi::prepare_data(spec, in.panel, in.counts);
  Data d{std::move(prepared.panel), std::move(prepared.counts), std::move(in.warnings)};
  d.warnings.insert(d.warnings.end(), prepared.warnings.begin(), prepared.warnings.end());
  return d;
}

int cmd_simulate(const npi::RunConfig& rc, const fs::path& dir) {
  npi::Scenario sc;
  sc.n_countries = rc.simulate.countries;
  sc.n_days = rc.simulate.days;
  sc.n_npis = rc.simulate.npis;
  sc.start_date = rc.simulate.start_date;
  sc.variant = rc.model.variant;
  sc.epi = rc.model.epi;
  sc.sigma_alpha = rc.model.sigma_alpha;
  sc.seed = rc.fit.seed;
  const auto data = npi::simulate_dataset(sc);
  npi::write_npis_csv((dir / "npis.csv").string(), data.panel);
  npi::write_counts_csv((dir / "counts.csv").string(), data.counts);
  json truth{{"npis", data.panel.npi_names},
             {"alpha", data.truth.effects.alpha},
             {"r0", data.truth.r0},
             {"n0_cases", data.truth.n0_cases},
             {"n0_deaths", data.truth.n0_deaths},
             {"psi_cases", std::isfinite(data.truth.psi_cases) ? json(data.truth.psi_cases) : json("inf")},
             {"psi_deaths", std::isfinite(data.truth.psi_deaths) ? json(data.truth.psi_deaths) : json("inf")},
             {"seed", sc.seed},
             {"variant", sc.variant.name}};
  if (sc.variant.effect == npi::EffectForm::Additive) truth["alpha_hat"] = data.truth.effects.alpha_hat;
  if (!data.truth.effects.alpha_country.empty()) truth["alpha_country"] = data.truth.effects.alpha_country;
  write_text(dir / "truth.json", truth.dump(2) + "\n");
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << (dir / "npis.csv").string() << ", " << (dir / "counts.csv").string() << ", "
            << (dir / "truth.json").string() << "\n";
  return kExitOk;
}

int cmd_fit(const npi::RunConfig& rc, const fs::path& dir) {
  const auto data = load(rc);
  const npi::Model model(rc.model, data.panel, data.counts);
  const auto fit = npi::sample_posterior(model, rc.fit);
  npi::write_trace_csv(fit.trace, (dir / "trace.csv").string());
  auto report = npi::make_fit_report("fit", rc, data.panel, fit);
  report.warnings = data.warnings;
  emit(dir, report);
  return fit.quality_ok ? kExitOk : kExitQuality;
}

int cmd_holdout(const npi::RunConfig& rc, const fs::path& dir) {
  const auto data = load(rc);
  const auto split = npi::holdout_split(data.counts, rc.holdout.test_countries, rc.holdout.keep_days);
  const npi::Model model(rc.model, data.panel, split.train);
  const auto fit = npi::sample_posterior(model, rc.fit);
  const auto score = npi::predictive_loglik(model, fit.trace, split.heldout, rc.fit.seed);
  npi::write_trace_csv(fit.trace, (dir / "trace.csv").string());
  auto report = npi::make_fit_report("holdout", rc, data.panel, fit);
  report.warnings = data.warnings;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  report.extra = {{"test_countries", rc.holdout.test_countries},
                  {"heldout_loglik_cases", num(score.cases)},
                  {"heldout_loglik_deaths", num(score.deaths)},
                  {"heldout_cells_cases", score.case_cells},
                  {"heldout_cells_deaths", score.death_cells}};
  emit(dir, report);
  return fit.quality_ok ? kExitOk : kExitQuality;
}

int cmd_sensitivity(const npi::RunConfig& rc, const fs::path& dir) {
  if (rc.npis_path.empty() || rc.counts_path.empty())
    throw npi::ConfigError("paths.npis and paths.counts (or --npis/--counts) are required");
  const auto in = npi::ingest(rc.npis_path, rc.counts_path, {.cumulative = rc.cumulative});
  npi::ExperimentSpec base;
  base.config = rc.model;
  base.rules = rc.mask;
  base.countries = in.counts.countries;
  base.npis = rc.npis.empty() ? in.panel.npi_names : rc.npis;
  std::vector<npi::SensitivityCategory> categories;
  for (const auto& c : rc.sensitivity.categories) categories.push_back(npi::sensitivity_category_by_name(c));
  const auto grid = npi::build_sensitivity_grid(base, rc.sensitivity.add_ins, categories);
  std::ofstream csv(dir / "sensitivity.csv");
  if (!csv) throw std::runtime_error("cannot write sensitivity.csv");
  const auto results = npi::run_sensitivity(grid, in.panel, in.counts, rc.fit, rc.sensitivity.workers, &csv);

  json losses = json::object(), failures = json::array();
  for (const auto& [cat, name] : npi::sensitivity_category_names()) {
    try {
      losses[name] = npi::sensitivity_loss(results, cat);
    } catch (const npi::UnavailableError&) {
    }
  }
  for (const auto& r : results)
    if (!r.error.empty()) failures.push_back({{"condition_id", r.condition_id}, {"error", r.error}});
  npi::FitReport report;
  report.command = "sensitivity";
  report.variant = rc.model.variant.name;
  report.seed = rc.fit.seed;
  report.chains = static_cast<std::size_t>(rc.fit.chains);
  report.samples = static_cast<std::size_t>(rc.fit.sampler.samples);
  report.unit = npi::effect_unit(rc.model.variant.effect);
  report.rhat_max = 0.0;
  for (const auto& r : results) {
    if (!r.error.empty()) continue;
    report.divergences += r.divergences;
    if (std::isfinite(r.rhat_max)) report.rhat_max = std::max(report.rhat_max, r.rhat_max);
  }
  report.quality_ok = failures.empty();  // the convergence gate is recorded, not enforced, for conditions
  report.config = npi::run_config_json(rc);
  report.extra = {{"conditions", grid.size()}, {"loss_by_category", losses}, {"failed_conditions", failures}};
  emit(dir, report);
  return failures.empty() ? kExitOk : kExitError;
}

int cmd_mle_check(const npi::RunConfig& rc, const fs::path& dir) {
  std::ofstream csv(dir / "mle_check.csv");
  if (!csv) throw std::runtime_error("cannot write mle_check.csv");
  csv << "theorem,npi,theorem_value,grid_value,joint_value\n";
  json rows = json::object();
  double worst = 0.0;
  for (auto th : {npi::Theorem::NoisyR, npi::Theorem::Default}) {
    const auto p = npi::random_ml_problem(th, rc.fit.seed, rc.simulate.countries, rc.simulate.npis, rc.simulate.days);
    const auto name = th == npi::Theorem::NoisyR ? "noisy-r" : "default";
    const auto check = npi::mle_check(p, th);
    for (const auto& row : check) {
      csv << name << ',' << npi::csv_escape(row.npi) << ',' << npi::format_double(row.theorem_value) << ','
          << npi::format_double(row.grid_value) << ',' << npi::format_double(row.joint_value) << '\n';
      worst = std::max({worst, std::abs(row.theorem_value - row.grid_value),
                        std::abs(row.theorem_value - row.joint_value)});
    }
    rows[name] = check.size();
  }
  npi::FitReport report;
  report.command = "mle-check";
  report.seed = rc.fit.seed;
  report.variant = "n/a";
  report.quality_ok = worst < 1e-4;
  report.config = npi::run_config_json(rc);
  report.extra = {{"npis_per_theorem", rows}, {"max_abs_disagreement", worst}};
  emit(dir, report);
  return kExitOk;
}

int cmd_cv(const npi::RunConfig& rc, const fs::path& dir) {
  const auto data = load(rc);
  const auto res = npi::crossvalidate(data.panel, data.counts, rc.model, rc.cv.grid, rc.fit, rc.cv.folds,
                                      rc.holdout.keep_days);
  npi::FitReport report;
  report.command = "cv";
  report.variant = rc.model.variant.name;
  report.seed = rc.fit.seed;
  report.chains = static_cast<std::size_t>(rc.fit.chains);
  report.samples = static_cast<std::size_t>(rc.fit.sampler.samples);
  report.quality_ok = true;
  report.warnings = data.warnings;
  report.config = npi::run_config_json(rc);
  report.extra = {{"folds", rc.cv.folds}, {"grid", res.grid}, {"mean_loglik", res.mean_loglik},
                  {"selected_noise_scale", res.selected}};
  emit(dir, report);
  return kExitOk;
}

void error_json(const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate the effectiveness of non-pharmaceutical interventions"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "top-level random seed");
    sub->add_option("--chains", opt.chains, "number of chains")->check(CLI::PositiveNumber);
    sub->add_option("--samples", opt.samples, "kept samples per chain")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--variant", opt.variant, "named model variant");
    sub->add_option("--npis", opt.npis_path, "NPI activation CSV");
    sub->add_option("--counts", opt.counts_path, "daily counts CSV");
  };
  std::vector<std::pair<CLI::App*, int (*)(const npi::RunConfig&, const fs::path&)>> commands{
      {app.add_subcommand("simulate", "simulate a synthetic dataset"), cmd_simulate},
      {app.add_subcommand("fit", "fit a model and report NPI effectiveness"), cmd_fit},
      {app.add_subcommand("holdout", "fit on training countries and score held-out data"), cmd_holdout},
      {app.add_subcommand("sensitivity", "run the sensitivity-analysis grid"), cmd_sensitivity},
      {app.add_subcommand("mle-check", "check the closed-form effect estimators"), cmd_mle_check},
      {app.add_subcommand("cv", "cross-validate the noise scale"), cmd_cv},
  };
  for (auto& [sub, _] : commands) add_common(sub);
  commands[3].first->add_option("--grid-categories", opt.grid_categories, "comma-separated sensitivity categories");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto rc = resolve(opt);
    const fs::path dir = rc.out_dir;
    fs::create_directories(dir);
    for (auto& [sub, fn] : commands)
      if (sub->parsed()) return fn(rc, dir);
  } catch (const npi::ConfigError& e) {
    error_json("config", e.what());
  } catch (const npi::ParseError& e) {
    error_json("parse", e.what());
  } catch (const npi::LookupError& e) {
    error_json("lookup", e.what());
  } catch (const npi::UnavailableError& e) {
    error_json("unavailable", e.what());
  } catch (const std::exception& e) {
    error_json("runtime", e.what());
  }
  return kExitError;
}
