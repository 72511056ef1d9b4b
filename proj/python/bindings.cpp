#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "evo/bounds.hpp"
#include "evo/config.hpp"
#include "evo/envs.hpp"
#include "evo/evt.hpp"
#include "evo/report.hpp"
#include "evo/train.hpp"

namespace py = pybind11;
using namespace evo;

namespace {

py::dict metrics_dict(const EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["mean_return"] = m.mean_return;
  d["mean_cost"] = m.mean_cost;
  d["violation_rate"] = m.violation_rate;
  d["nu"] = m.nu;
  d["mu_hat"] = m.mu_hat;
  d["xi"] = m.xi;
  d["sigma"] = m.sigma;
  d["risk_boundary"] = m.risk_boundary;
  d["nu0"] = m.nu0;
  d["prob_bound"] = m.prob_bound;
  d["ks_gpd"] = m.ks_gpd;
  d["ks_gauss"] = m.ks_gauss;
  return d;
}

TrainConfig make_config(const std::string& text, const std::vector<std::string>& overrides) {
  auto c = parse_config(text);
  for (const auto& o : overrides) apply_override(c, o);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::class_<evt::GpdParams>(m, "GpdParams")
      .def(py::init([](double xi, double sigma, std::size_t n_peaks, std::size_t n_total, double threshold) {
             evt::GpdParams p;
             p.xi = xi;
             p.sigma = sigma;
             p.n_peaks = n_peaks;
             p.n_total = n_total;
             p.threshold = threshold;
             return p;
           }),
           py::arg("xi"), py::arg("sigma"), py::arg("n_peaks") = 1, py::arg("n_total") = 1, py::arg("threshold") = 0.0)
      .def_readwrite("xi", &evt::GpdParams::xi)
      .def_readwrite("sigma", &evt::GpdParams::sigma)
      .def_readwrite("n_peaks", &evt::GpdParams::n_peaks)
      .def_readwrite("n_total", &evt::GpdParams::n_total)
      .def_readwrite("threshold", &evt::GpdParams::threshold)
      .def_property_readonly("mu_hat", &evt::GpdParams::mu_hat)
      .def("__repr__", [](const evt::GpdParams& p) {
        return "GpdParams(xi=" + format_double(p.xi) + ", sigma=" + format_double(p.sigma) + ")";
      });

  m.def("extract_peaks", [](const std::vector<double>& x, double t) { return evt::extract_peaks(x, t); });
  m.def("fit_gpd_mle", [](const std::vector<double>& excesses) { return evt::fit_gpd_mle(excesses); });
  m.def("fit_tail", [](const std::vector<double>& x, double t) { return evt::fit_tail(x, t); });
  m.def("gpd_cdf", &evt::gpd_cdf);
  m.def("gpd_pdf", &evt::gpd_pdf);
  m.def("gpd_quantile", &evt::gpd_quantile);
  m.def("gpd_log_likelihood", [](double xi, double sigma, const std::vector<double>& y) {
    return evt::gpd_log_likelihood(xi, sigma, y);
  });
  m.def("risk_boundary", py::overload_cast<const evt::GpdParams&, double>(&evt::risk_boundary));
  m.def("empirical_quantile", [](const std::vector<double>& x, double level) { return evt::empirical_quantile(x, level); });
  m.def("ks_gpd", [](const std::vector<double>& x, const evt::GpdParams& p) {
    return evt::ks_statistic(x, [&](double z) { return evt::gpd_cdf(p, z); });
  });

  m.def("compute_nu0", &bounds::compute_nu0);
  m.def("estimate_tv_term", &bounds::estimate_tv_term);
  m.def("violation_prob_bound", &bounds::violation_prob_bound);
  m.def("variance_pair", [](double mu, double nu, long long n, double f) {
    const auto v = bounds::variance_pair(mu, nu, n, f);
    return py::make_tuple(v.omega_evo, v.omega_qr);
  });
  m.def("ratio_metric", &ratio_metric);

  m.def("environment_ids", &envs::environment_ids);
  py::class_<envs::Environment>(m, "Environment")
      .def_property_readonly("id", [](const envs::Environment& e) { return e.spec().id; })
      .def_property_readonly("observation_dim", [](const envs::Environment& e) { return e.spec().observation_dim; })
      .def_property_readonly("max_episode_len", [](const envs::Environment& e) { return e.spec().max_episode_len; })
      .def("reset", &envs::Environment::reset, py::arg("seed"))
      .def("step", [](envs::Environment& e, const Action& a) {
        const auto r = e.step(a);
        return py::make_tuple(r.observation, r.reward, r.cost, r.done, r.truncated);
      });
  m.def("make_environment", [](const std::string& id) { return envs::make_environment(id); }, py::arg("id"));

  m.def(
      "config_text", [](const std::string& text, const std::vector<std::string>& overrides) {
        return make_config(text, overrides).to_text();
      },
      py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "train",
      [](const std::string& text, const std::vector<std::string>& overrides) {
        const auto config = make_config(text, overrides);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(config);
        }
        py::list rows;
        for (const auto& e : r.metrics) rows.append(metrics_dict(e));
        return rows;
      },
      py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{},
      "Runs training from key=value config text; returns per-epoch metrics.");
  m.def("summarize_runs", [](const std::string& dir, double eps) {
    py::list rows;
    for (const auto& s : summarize_runs(dir, eps)) {
      py::dict d;
      d["name"] = s.name;
      d["epochs"] = s.epochs;
      d["mean_return"] = s.mean_return;
      d["violation_rate"] = s.violation_rate;
      d["ratio"] = s.ratio;
      d["normalized_ratio"] = s.normalized_ratio;
      rows.append(d);
    }
    return rows;
  });
}
