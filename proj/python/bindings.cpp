#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phage/analysis.hpp"
#include "phage/errors.hpp"
#include "phage/integrate.hpp"
#include "phage/model.hpp"
#include "phage/report_io.hpp"

namespace py = pybind11;
using namespace phage;

namespace {

py::dict trajectory_dict(const HistoryTrajectory& traj) {
    const auto n = static_cast<py::ssize_t>(traj.size());
    py::array_t<double> t(n), S(n), Q(n);
    auto tv = t.mutable_unchecked<1>();
    auto sv = S.mutable_unchecked<1>();
    auto qv = Q.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) {
        tv(i) = traj.time(static_cast<std::size_t>(i));
        sv(i) = traj.states[static_cast<std::size_t>(i)].S;
        qv(i) = traj.states[static_cast<std::size_t>(i)].Q;
    }
    py::list excursions;
    for (const auto& e : traj.positivity.excursions) {
        excursions.append(py::dict(py::arg("component") = std::string(1, e.component), py::arg("t_start") = e.t_start,
                                   py::arg("t_end") = e.t_end, py::arg("min_value") = e.min_value,
                                   py::arg("nodes") = e.nodes));
    }
    py::dict d;
    d["t"] = t;
    d["S"] = S;
    d["Q"] = Q;
    d["dt"] = traj.dt;
    d["min_S"] = traj.positivity.min_S;
    d["min_Q"] = traj.positivity.min_Q;
    d["excursions"] = excursions;
    return d;
}

InitialCondition make_init(const std::string& family, double a, double b) {
    if (family == "constant") {
        return InitialCondition::constant(a, b);
    }
    if (family == "exponential") {
        return InitialCondition::exponential(a, b);
    }
    throw InputError("init family must be 'constant' or 'exponential'");
}

HistoryTrajectory from_arrays(py::array_t<double> t, py::array_t<double> S, py::array_t<double> Q) {
    auto tv = t.unchecked<1>();
    auto sv = S.unchecked<1>();
    auto qv = Q.unchecked<1>();
    if (tv.shape(0) < 1 || sv.shape(0) != tv.shape(0) || qv.shape(0) != tv.shape(0)) {
        throw InputError("t, S, Q must be non-empty arrays of equal length");
    }
    HistoryTrajectory h;
    h.t0 = tv(0);
    h.dt = tv.shape(0) > 1 ? tv(1) - tv(0) : 1.0;
    for (py::ssize_t i = 0; i < tv.shape(0); ++i) {
        h.states.push_back({sv(i), qv(i)});
    }
    return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bacteria-phage delayed SDE core";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<HypothesisError>(m, "HypothesisError", PyExc_ValueError);
    py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_RuntimeError);
    py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](double alpha, double k, double d, double mm, double b, double mu, double zeta, double M,
                         const std::string& bridge) {
                 ModelParams p;
                 p.alpha = alpha;
                 p.k = k;
                 p.d = d;
                 p.m = mm;
                 p.b = b;
                 p.mu = mu;
                 p.zeta = zeta;
                 p.sigma_cfg.M = M;
                 p.sigma_cfg.bridge = bridge_from_string(bridge);
                 p.validate();
                 return p;
             }),
             py::arg("alpha") = 12.1622, py::arg("k") = 27.36, py::arg("d") = 0.1, py::arg("m") = 0.1947,
             py::arg("b") = 61.0, py::arg("mu") = 0.5, py::arg("zeta") = 0.01875, py::arg("M") = 10.0,
             py::arg("bridge") = "smoothstep_quintic")
        .def_readwrite("alpha", &ModelParams::alpha)
        .def_readwrite("k", &ModelParams::k)
        .def_readwrite("d", &ModelParams::d)
        .def_readwrite("m", &ModelParams::m)
        .def_readwrite("b", &ModelParams::b)
        .def_readwrite("mu", &ModelParams::mu)
        .def_readwrite("zeta", &ModelParams::zeta)
        .def_property_readonly("M", &ModelParams::M)
        .def_property_readonly("gamma", &ModelParams::gamma)
        .def_property_readonly("E0", [](const ModelParams& p) { return std::make_pair(p.E0().S, p.E0().Q); })
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(alpha=" + std::to_string(p.alpha) + ", k=" + std::to_string(p.k) +
                   ", d=" + std::to_string(p.d) + ", m=" + std::to_string(p.m) + ", b=" + std::to_string(p.b) +
                   ", mu=" + std::to_string(p.mu) + ", zeta=" + std::to_string(p.zeta) +
                   ", M=" + std::to_string(p.M()) + ")";
        });

    m.def(
        "sigma", [](double x, const ModelParams& p) { return sigma_eval(x, p.sigma_cfg).value; }, py::arg("x"),
        py::arg("params") = ModelParams{});

    m.def(
        "drift",
        [](const ModelParams& p, double S, double Q, std::optional<std::pair<double, double>> lag) {
            const Vec2 f = lag ? drift_delayed({S, Q}, {lag->first, lag->second}, p) : drift_nondelayed({S, Q}, p);
            return std::make_pair(f[0], f[1]);
        },
        py::arg("params"), py::arg("S"), py::arg("Q"), py::arg("lag") = py::none());

    m.def(
        "equilibria",
        [](const ModelParams& p, bool delayed) {
            const auto rep = equilibria(p, delayed);
            py::list pts;
            for (const auto& e : rep.points) {
                pts.append(py::make_tuple(e.z.S, e.z.Q, to_string(e.classification)));
            }
            py::dict d;
            d["points"] = pts;
            d["eigenvalues"] = std::make_pair(rep.eigenvalues[0], rep.eigenvalues[1]);
            d["jacobian"] = rep.jacobian_at_E0;
            return d;
        },
        py::arg("params"), py::arg("delayed") = true);

    m.def("decay_rate_eta", &decay_rate_eta, py::arg("params"));

    m.def(
        "simulate_deterministic",
        [](const ModelParams& p, double dt, double t_end, bool delayed, const std::string& init, double a,
           double b) {
            return trajectory_dict(integrate_deterministic(p, make_init(init, a, b), {dt, t_end, true}, delayed));
        },
        py::arg("params"), py::arg("dt") = 1e-4, py::arg("t_end") = 1.0, py::arg("delayed") = true,
        py::arg("init") = "exponential", py::arg("a") = 4.8, py::arg("b") = 0.0);

    m.def(
        "simulate",
        [](const ModelParams& p, double eps, std::uint64_t seed, std::uint64_t path_index, double dt, double t_end,
           bool delayed, const std::string& scheme, const std::string& init, double a, double b) {
            NoiseConfig noise{eps, seed, path_index, scheme_from_string(scheme), 1};
            HistoryTrajectory traj;
            {
                py::gil_scoped_release release;
                traj = integrate_sde_path(p, make_init(init, a, b), noise, {dt, t_end, true}, delayed);
            }
            return trajectory_dict(traj);
        },
        py::arg("params"), py::arg("eps"), py::arg("seed") = 0, py::arg("path_index") = 0, py::arg("dt") = 1e-4,
        py::arg("t_end") = 1.0, py::arg("delayed") = true, py::arg("scheme") = "em", py::arg("init") = "exponential",
        py::arg("a") = 4.8, py::arg("b") = 0.0);

    m.def(
        "estimate_concentration",
        [](const ModelParams& p, double eps, double rho, std::pair<double, double> interval, std::size_t n_paths,
           std::uint64_t seed, double dt, bool delayed, const std::string& scheme, const std::string& init, double a,
           double b, unsigned threads) {
            ConcentrationQuery q;
            q.rho = rho;
            q.interval = {interval.first, interval.second};
            q.n_paths = n_paths;
            q.eps = eps;
            q.grid = {dt, interval.second, true};
            q.delayed = delayed;
            q.scheme = scheme_from_string(scheme);
            ConcentrationEstimate e;
            {
                py::gil_scoped_release release;
                e = estimate_concentration(q, p, make_init(init, a, b), seed, threads);
            }
            py::dict d;
            d["exceed_count"] = e.exceed_count;
            d["p_hat"] = e.p_hat;
            d["ci"] = std::make_pair(e.ci_lo, e.ci_hi);
            d["n_paths"] = e.n_paths;
            d["failures"] = e.failures;
            return d;
        },
        py::arg("params"), py::arg("eps"), py::arg("rho") = 0.1, py::arg("interval") = std::make_pair(20.0, 40.0),
        py::arg("n_paths") = 1000, py::arg("seed") = 0, py::arg("dt") = 1e-3, py::arg("delayed") = false,
        py::arg("scheme") = "em", py::arg("init") = "constant", py::arg("a") = 1e-4, py::arg("b") = 0.6,
        py::arg("threads") = 0);

    m.def("interval_from_kappas", [](double k1, double k2, double c, double rho, double eta) {
        const Interval i = interval_from_kappas(k1, k2, c, rho, eta);
        return std::make_pair(i.lo, i.hi);
    });

    m.def("wilson_ci", &wilson_ci, py::arg("successes"), py::arg("trials"), py::arg("confidence") = 0.95);

    m.def(
        "check_hypothesis1",
        [](const ModelParams& p, double S0, double Q0) {
            const auto rep = check_hypothesis1(p, {S0, Q0});
            py::list clauses;
            for (const auto& c : rep.clauses) {
                clauses.append(py::dict(py::arg("clause") = c.clause, py::arg("passed") = c.passed,
                                        py::arg("margin") = c.margin, py::arg("detail") = c.detail));
            }
            return py::make_tuple(rep.all_passed(), clauses);
        },
        py::arg("params"), py::arg("S0"), py::arg("Q0"));

    m.def(
        "render_svg",
        [](py::array_t<double> t, py::array_t<double> S, py::array_t<double> Q, const std::string& label,
           const std::string& title) {
            const HistoryTrajectory h = from_arrays(t, S, Q);
            return render_trajectory_svg({{label, "#000000", &h}}, title);
        },
        py::arg("t"), py::arg("S"), py::arg("Q"), py::arg("label") = "trajectory", py::arg("title") = "");
}
