#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "epinuts/cli.hpp"
#include "epinuts/dataio.hpp"
#include "epinuts/diagnostics.hpp"
#include "epinuts/error.hpp"
#include "epinuts/nuts.hpp"
#include "epinuts/posterior.hpp"
#include "epinuts/stats.hpp"

namespace py = pybind11;
using namespace epinuts;

namespace {

py::dict block_to_dict(const model::ParameterBlock& p) {
  py::dict d;
  d["r0"] = p.r0;
  d["kappa"] = p.kappa;
  d["alpha"] = std::vector<double>(p.alpha.begin(), p.alpha.end());
  d["beta"] = p.beta;
  d["gamma"] = p.gamma;
  d["psi"] = p.psi;
  d["ifr_noise"] = p.ifr_noise;
  d["seed"] = p.seed;
  d["tau"] = p.tau;
  return d;
}

// Assembled inputs plus the posterior built from them.
class Model {
 public:
  Model(const std::string& deaths, const std::string& interventions, const std::string& country_meta,
        const std::string& age_table, std::vector<std::string> countries, int pi_horizon, int g_horizon,
        bool r0_noncentered, bool beta_noncentered) {
    dataio::RunConfig config;
    config.countries = std::move(countries);
    config.pi_horizon = pi_horizon;
    config.g_horizon = g_horizon;
    std::optional<dataio::AgeTables> ages;
    if (!age_table.empty()) ages = dataio::load_age_table(age_table);
    auto assembled = dataio::assemble_inputs(dataio::load_deaths(deaths), dataio::load_interventions(interventions),
                                             dataio::load_country_meta(country_meta), ages ? &*ages : nullptr, config);
    warnings_ = std::move(assembled.warnings);
    posterior_ = std::make_unique<model::Posterior>(assembled.inputs,
                                                     model::ModelOptions{r0_noncentered, beta_noncentered});
  }

  std::size_t dim() const { return posterior_->dim(); }
  std::vector<std::string> parameter_names() const { return posterior_->parameter_names(); }
  std::vector<std::string> countries() const {
    std::vector<std::string> out;
    for (const auto& c : posterior_->inputs().countries) out.push_back(c.name);
    return out;
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double log_density(const std::vector<double>& theta) const { return posterior_->log_density(theta); }

  py::tuple gradient(const std::vector<double>& theta) const {
    std::vector<double> grad(theta.size());
    ad::Tape tape;
    const double v = posterior_->log_density_gradient(theta, grad, tape);
    return py::make_tuple(v, grad);
  }

  py::dict constrain(const std::vector<double>& theta) const {
    return block_to_dict(posterior_->unpack(theta).params);
  }

  py::dict sample(int chains, int warmup, int iters, std::uint64_t seed, double target_accept,
                  int max_tree_depth) const {
    sampler::ChainConfig cc;
    cc.warmup_iters = warmup;
    cc.sampling_iters = iters;
    cc.base_seed = seed;
    cc.target_accept = target_accept;
    cc.max_tree_depth = max_tree_depth;
    auto box = posterior_->init_box(cc.init_jitter_scale);
    cc.init_center = std::move(box.center);
    cc.init_radius = std::move(box.radius);
    std::vector<sampler::ChainResult> results;
    {
      py::gil_scoped_release release;
      results = sampler::run_chains(cc, static_cast<std::size_t>(chains),
                                    [this] { return posterior_->make_gradient_fn(); }, posterior_->dim());
    }
    cli::DrawTable draws(results.size());
    std::vector<std::size_t> divergences;
    std::vector<double> step_sizes;
    for (std::size_t c = 0; c < results.size(); ++c) {
      for (std::size_t i = 0; i < results[c].n_draws(); ++i) {
        draws[c].push_back(posterior_->flatten(posterior_->unpack(results[c].draw(i)).params));
      }
      divergences.push_back(results[c].divergences());
      step_sizes.push_back(results[c].step_size);
    }
    py::dict out;
    out["names"] = posterior_->parameter_names();
    out["draws"] = draws;
    out["divergences"] = divergences;
    out["step_sizes"] = step_sizes;
    return out;
  }

 private:
  std::unique_ptr<model::Posterior> posterior_;
  std::vector<std::string> warnings_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semi-mechanistic renewal model of deaths with a NUTS sampler";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("generation_pmf", [](int horizon) { return stats::generation_pmf(horizon).weights; },
        py::arg("horizon") = stats::kDefaultGenerationHorizon,
        "Discretized generation interval, weights for days 1..horizon.");
  m.def("infection_to_death_pmf", [](int horizon) { return stats::infection_to_death_pmf(horizon).weights; },
        py::arg("horizon") = stats::kDefaultDeathHorizon,
        "Discretized infection-to-death delay, weights for days 1..horizon.");
  m.def("logpmf_negbinomial",
        [](std::int64_t y, double mu, double psi) { return stats::logpmf_negbinomial(y, {mu, psi}); },
        py::arg("y"), py::arg("mu"), py::arg("psi"));

  m.def(
      "prior_effects",
      [](std::int64_t draws, std::uint64_t seed) {
        const auto d = cli::draw_prior_effects(draws, seed);
        py::dict out;
        out["single"] = d.single;
        out["lockdown"] = d.lockdown;
        out["joint"] = d.joint;
        out["joint_beta"] = d.joint_beta;
        out["p_alpha_negative"] = std::vector<double>(d.p_alpha_negative.begin(), d.p_alpha_negative.end());
        return out;
      },
      py::arg("draws") = 200000, py::arg("seed") = 1);
  m.def("ks_uniform", &cli::ks_uniform, py::arg("sample"), py::arg("upper"));

  m.def(
      "summarize",
      [](const std::vector<std::string>& names, const cli::DrawTable& draws) {
        return cli::summary_csv(cli::summarize(names, draws));
      },
      py::arg("names"), py::arg("draws"), "summary.csv text for draws[chain][draw][parameter].");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "epinuts");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool; returns (exit code, stdout, stderr).");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const std::string&, const std::string&, const std::string&,
                    std::vector<std::string>, int, int, bool, bool>(),
           py::arg("deaths"), py::arg("interventions"), py::arg("country_meta"), py::arg("age_table") = "",
           py::arg("countries") = std::vector<std::string>{}, py::arg("pi_horizon") = stats::kDefaultDeathHorizon,
           py::arg("g_horizon") = stats::kDefaultGenerationHorizon, py::arg("r0_noncentered") = false,
           py::arg("beta_noncentered") = true)
      .def_property_readonly("dim", &Model::dim)
      .def_property_readonly("parameter_names", &Model::parameter_names)
      .def_property_readonly("countries", &Model::countries)
      .def_property_readonly("warnings", &Model::warnings)
      .def("log_density", &Model::log_density, py::arg("theta"))
      .def("gradient", &Model::gradient, py::arg("theta"), "Returns (log density, gradient).")
      .def("constrain", &Model::constrain, py::arg("theta"))
      .def("sample", &Model::sample, py::arg("chains") = 4, py::arg("warmup") = 1000, py::arg("iters") = 1000,
           py::arg("seed") = 1, py::arg("target_accept") = 0.95, py::arg("max_tree_depth") = 12);
}
