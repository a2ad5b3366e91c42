#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "critsense/criticality.hpp"
#include "critsense/estimation.hpp"
#include "critsense/fidelity.hpp"
#include "critsense/model.hpp"

namespace py = pybind11;
using namespace critsense;

namespace {

MethodSet methods_from(const std::vector<std::string>& names) {
    MethodSet s{false, false, false};
    for (const auto& n : names) {
        switch (method_from_string(n)) {
            case Method::moment: s.moment = true; break;
            case Method::classical: s.classical = true; break;
            case Method::quantum: s.quantum = true; break;
        }
    }
    return s;
}

ModelParams make_params(int n, double tunneling, double control, double delta) {
    ModelParams p;
    p.n_particles = n;
    p.tunneling = tunneling;
    p.control = control;
    p.imbalance = delta;
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Fidelity susceptibilities of the bosonic Josephson junction";

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init(&make_params), py::arg("n_particles"), py::arg("tunneling") = 1.0, py::arg("control") = 0.0,
             py::arg("delta") = 0.0)
        .def_readwrite("n_particles", &ModelParams::n_particles)
        .def_readwrite("tunneling", &ModelParams::tunneling)
        .def_readwrite("control", &ModelParams::control)
        .def_readwrite("delta", &ModelParams::imbalance)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(n_particles=" + std::to_string(p.n_particles) + ", tunneling=" +
                   std::to_string(p.tunneling) + ", control=" + std::to_string(p.control) + ", delta=" +
                   std::to_string(p.imbalance) + ")";
        });

    m.def(
        "spectrum",
        [](const ModelParams& p, int count) {
            const auto h = build_hamiltonian(p);
            const Spectrum s = count <= 0 ? diagonalize(h) : lowest_states(h, count);
            return py::make_tuple(s.energies, s.eigenvectors);
        },
        py::arg("params"), py::arg("count") = 0, "Energies and Jz-basis eigenvectors (all states when count <= 0).");

    m.def(
        "jz_distribution",
        [](const ModelParams& p, double temperature) {
            const auto d = jz_distribution(equilibrium_state(p, temperature));
            return py::make_tuple(d.jz, d.probabilities);
        },
        py::arg("params"), py::arg("temperature") = 0.0);

    m.def(
        "susceptibilities",
        [](const ModelParams& p, double lambda, double temperature, double epsilon0) {
            PointOptions o;
            o.temperature = temperature;
            o.epsilon0 = epsilon0;
            const auto r = evaluate_point(p, lambda, MethodSet{}, o);
            py::dict d;
            d["chi_mom"] = r.chi_mom;
            d["chi_cl"] = r.chi_cl;
            d["chi_q"] = r.chi_q;
            d["mean_jz"] = r.mean;
            d["var_jz"] = r.variance;
            d["rank"] = r.rank;
            return d;
        },
        py::arg("params"), py::arg("lam"), py::arg("temperature") = 0.0, py::arg("epsilon0") = 1e-4);

    m.def(
        "scan",
        [](const ModelParams& p, std::vector<double> grid, double temperature, std::vector<std::string> methods,
           unsigned threads) {
            ScanConfig c;
            c.params = p;
            c.lambda_grid = std::move(grid);
            c.temperature = temperature;
            c.which = methods_from(methods);
            c.threads = threads;
            SusceptibilityCurve curve;
            {
                py::gil_scoped_release release;
                curve = scan_lambda(c);
            }
            py::dict d;
            d["lambda"] = curve.lambda_grid;
            if (c.which.moment) d["chi_mom"] = curve.chi_mom;
            if (c.which.classical) d["chi_cl"] = curve.chi_cl;
            if (c.which.quantum) d["chi_q"] = curve.chi_q;
            d["mean_jz"] = curve.mean;
            d["var_jz"] = curve.variance;
            return d;
        },
        py::arg("params"), py::arg("grid"), py::arg("temperature") = 0.0,
        py::arg("methods") = std::vector<std::string>{"moment", "classical", "quantum"}, py::arg("threads") = 0);

    m.def("uniform_grid", &uniform_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));

    m.def(
        "critical_point",
        [](int n, double lo, double hi, double tunneling) {
            ModelParams p;
            p.tunneling = tunneling;
            const auto r = locate_critical_gap(p, n, lo, hi);
            return py::make_tuple(r.lambda_c_N, r.gap_at_min);
        },
        py::arg("n_particles"), py::arg("lo") = -1.5, py::arg("hi") = -0.8, py::arg("tunneling") = 1.0,
        "Minimum of E2 - E0 at delta = 0: (lambda_c(N), gap).");

    m.def(
        "fit_power_law",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            const auto f = fit_power_law(x, y);
            return py::make_tuple(f.exponent, f.prefactor, f.r_squared);
        },
        py::arg("x"), py::arg("y"), "(exponent, prefactor, r^2) of y = c x^p.");

    m.def(
        "bhattacharyya",
        [](const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
            return bhattacharyya_fidelity(std::span<const double>(p.data(), p.size()),
                                          std::span<const double>(q.data(), q.size()));
        },
        py::arg("p"), py::arg("q"));
    m.def(
        "uhlmann",
        [](const Eigen::VectorXd& w1, const Eigen::MatrixXd& v1, const Eigen::VectorXd& w2, const Eigen::MatrixXd& v2) {
            return uhlmann_fidelity(DensityOperator{w1, v1}, DensityOperator{w2, v2});
        },
        py::arg("w1"), py::arg("v1"), py::arg("w2"), py::arg("v2"),
        "Fidelity of sum_k w_k v_k v_k^T pairs (columns of v orthonormal).");

    py::class_<OrderParameterFamily> fam(m, "OrderParameterFamily");
    py::enum_<OrderParameterFamily::Kind>(fam, "Kind")
        .value("tanh", OrderParameterFamily::Kind::tanh)
        .value("sqrt", OrderParameterFamily::Kind::sqrt);
    fam.def(py::init<>())
        .def_readwrite("kind", &OrderParameterFamily::kind)
        .def_readwrite("critical", &OrderParameterFamily::critical)
        .def_readwrite("offset", &OrderParameterFamily::offset)
        .def_readwrite("scale", &OrderParameterFamily::scale)
        .def_readwrite("smoothing", &OrderParameterFamily::smoothing)
        .def_readwrite("sigma", &OrderParameterFamily::sigma)
        .def_readwrite("asymmetry", &OrderParameterFamily::asymmetry)
        .def("zbar", &OrderParameterFamily::zbar)
        .def("chi_mom", &OrderParameterFamily::chi_mom);

    m.def(
        "analyze_family",
        [](const OrderParameterFamily& f, const std::vector<double>& grid, std::size_t n_samples, std::uint64_t seed,
           int n_replicas) {
            py::dict d;
            SeriesAnalysis a;
            BootstrapResult bm, bc;
            {
                py::gil_scoped_release release;
                a = analyze_series(synth_family(f, grid, n_samples, seed));
                if (n_replicas > 0) {
                    BootstrapOptions o;
                    o.n_replicas = n_replicas;
                    o.seed = replica_seed(seed, 0xB007ULL);
                    bm = bootstrap(a, Estimator::chi_mom, o);
                    bc = bootstrap(a, Estimator::chi_cl, o);
                }
            }
            std::vector<double> zbar, sigma, chi_mom, chi_cl, err_mom, err_cl;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                zbar.push_back(a.fits[i].separation);
                sigma.push_back(a.fits[i].width);
                chi_mom.push_back(a.chi_mom[i].value);
                chi_cl.push_back(a.chi_cl[i].value);
                if (n_replicas > 0) {
                    err_mom.push_back(bm.points[i].width);
                    err_cl.push_back(bc.points[i].width);
                }
            }
            d["a_s"] = grid;
            d["zbar"] = zbar;
            d["sigma_z"] = sigma;
            d["chi_mom"] = chi_mom;
            d["chi_cl"] = chi_cl;
            if (n_replicas > 0) {
                d["chi_mom_err"] = err_mom;
                d["chi_cl_err"] = err_cl;
            }
            return d;
        },
        py::arg("family"), py::arg("grid"), py::arg("n_samples") = 100000, py::arg("seed") = 1,
        py::arg("n_replicas") = 0, "Synthesise a series, fit it and estimate chi; error bars when n_replicas >= 100.");

    py::register_exception<EigensolverError>(m, "EigensolverError", PyExc_RuntimeError);
}
