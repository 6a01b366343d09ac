#include "homlab/ymeasure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "homlab/diffuse.hpp"
#include "homlab/parallel.hpp"
#include "homlab/stats.hpp"

namespace homlab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double plain_mean(const Eigen::ArrayXd& v, Eigen::Index lo, Eigen::Index len) {
    return v.segment(lo, len).mean();
}

}  // namespace

EmpiricalMeasure window_samples(const DiscreteProfile& u, const CoefficientField& a,
                                const MacroModulus& m, double eps, double W, int N,
                                const std::string& minimizer_id) {
    u.validate();
    if (eps <= 0) throw std::invalid_argument("eps must be positive");
    if (W < 1.0) throw std::invalid_argument("window length W must be at least 1");
    if (N < 10) throw std::invalid_argument("at least 10 atoms are required");

    const double h = u.h;
    const auto unit_cells = static_cast<Eigen::Index>(std::lround(1.0 / h));
    // Two extra nodes so difference stencils survive shifts up to the margin.
    const auto margin = static_cast<Eigen::Index>(std::lround((W - 1.0) / (2.0 * h))) + 2;
    const Eigen::Index stored = unit_cells + 2 * margin;  // cells per stored window

    EmpiricalMeasure P;
    P.eps = eps;
    P.step = h;
    P.window_len = static_cast<double>(stored) * h;
    P.unit_cells = unit_cells;
    P.margin_cells = margin;
    P.requested_atoms = N;
    P.model = a.model().describe();
    P.seed = a.model().seed;
    P.minimizer_id = minimizer_id;

    std::vector<WindowAtom> atoms(static_cast<std::size_t>(N));
    std::vector<char> keep(static_cast<std::size_t>(N), 0);
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t j) {
        const double x = (static_cast<double>(j) + 0.5) / static_cast<double>(N);
        const double t = x / eps;
        // Unit-window start in the profile's global grid, then the margin.
        const auto i0 = static_cast<Eigen::Index>(std::lround((t - 0.5 - u.x0) / h));
        const Eigen::Index lo = i0 - margin;
        const Eigen::Index hi = i0 + unit_cells + margin;
        if (lo < 0 || hi >= u.size()) return;  // window overflows: dropped
        WindowAtom atom;
        atom.x = x;
        atom.m_value = eval_macro(m, x);
        atom.profile_window = u.values.segment(lo, stored + 1);
        atom.coeff_window.resize(stored + 1);
        for (Eigen::Index l = 0; l <= stored; ++l)
            atom.coeff_window[l] = a.eval(u.x0 + h * static_cast<double>(lo + l));
        atoms[j] = std::move(atom);
        keep[j] = 1;
    });

    for (std::size_t j = 0; j < atoms.size(); ++j) {
        if (keep[j]) P.atoms.push_back(std::move(atoms[j]));
    }
    P.dropped_atoms = N - static_cast<int>(P.atoms.size());
    if (P.atoms.empty()) throw std::invalid_argument("profile too short: every window was dropped");
    for (auto& atom : P.atoms) atom.weight = 1.0 / static_cast<double>(P.atoms.size());
    return P;
}

double energy_from_measure(const EmpiricalMeasure& P) {
    if (P.atoms.empty()) throw std::invalid_argument("empty measure");
    if (P.window_len < 1.0) throw std::invalid_argument("windows shorter than the unit interval");
    double total = 0;
    for (const auto& atom : P.atoms) {
        total += atom.weight * local_average_integrand_sampled(atom.profile_window, atom.coeff_window,
                                                               P.step, P.margin_cells, P.unit_cells,
                                                               atom.m_value, P.eps);
    }
    return total;
}

namespace {

double observable_value(const EmpiricalMeasure& P, const WindowAtom& atom, WindowObservable obs,
                        Eigen::Index lo) {
    const Eigen::Index len = P.unit_cells + 1;
    switch (obs) {
        case WindowObservable::coeff_mean:
            return plain_mean(atom.coeff_window, lo, len);
        case WindowObservable::energy_density:
            return local_average_integrand_sampled(atom.profile_window, atom.coeff_window, P.step, lo,
                                                   P.unit_cells, atom.m_value, P.eps);
        case WindowObservable::mean_abs_slope: {
            double s = 0;
            for (Eigen::Index i = lo; i < lo + len; ++i)
                s += std::abs(atom.profile_window[i + 1] - atom.profile_window[i - 1]);
            return s / (2.0 * P.step * static_cast<double>(len));
        }
    }
    return 0;
}

}  // namespace

double invariance_diagnostic(const EmpiricalMeasure& P, double y,
                             const std::vector<WindowObservable>& observables) {
    if (P.atoms.empty()) throw std::invalid_argument("empty measure");
    if (std::abs(y) > P.window_len / 4.0 + 1e-9)
        throw std::domain_error("shift y exceeds a quarter of the window length");
    const auto d = static_cast<Eigen::Index>(std::lround(y / P.step));
    const Eigen::Index base = P.margin_cells;
    // Central slopes at the window edges need one extra stored node.
    if (base + std::min<Eigen::Index>(d, 0) < 1 ||
        base + P.unit_cells + std::max<Eigen::Index>(d, 0) + 1 >= P.atoms[0].coeff_window.size())
        throw std::domain_error("shift y exceeds the stored margin");

    double worst = 0;
    for (WindowObservable obs : observables) {
        std::vector<double> at0, aty;
        at0.reserve(P.atoms.size());
        aty.reserve(P.atoms.size());
        for (const auto& atom : P.atoms) {
            at0.push_back(observable_value(P, atom, obs, base));
            aty.push_back(observable_value(P, atom, obs, base + d));
        }
        worst = std::max(worst, ks_distance(std::move(at0), std::move(aty)));
    }
    return worst;
}

double marginal_q_diagnostic(const EmpiricalMeasure& P, const FieldModel& model,
                             const std::vector<std::uint64_t>& reference_seeds, MarginalStatistic stat) {
    if (P.atoms.empty()) throw std::invalid_argument("empty measure");
    if (reference_seeds.empty()) throw std::invalid_argument("reference seeds required");

    const Eigen::Index len = P.unit_cells + 1;
    const Eigen::Index lo = P.margin_cells;
    std::vector<double> sample;
    sample.reserve(P.atoms.size());
    for (const auto& atom : P.atoms) {
        sample.push_back(stat == MarginalStatistic::center_value
                             ? atom.coeff_window[lo + P.unit_cells / 2]
                             : plain_mean(atom.coeff_window, lo, len));
    }

    std::vector<double> reference(reference_seeds.size());
    parallel_for(reference_seeds.size(), [&](std::size_t k) {
        const CoefficientField f = realize(model, reference_seeds[k]);
        if (stat == MarginalStatistic::center_value) {
            reference[k] = f.eval(0.0);
            return;
        }
        double s = 0;
        for (Eigen::Index l = 0; l < len; ++l)
            s += f.eval((static_cast<double>(l) - static_cast<double>(P.unit_cells) / 2.0) * P.step);
        reference[k] = s / static_cast<double>(len);
    });

    return ks_distance(std::move(sample), std::move(reference));
}

void save_measure(const EmpiricalMeasure& P, const std::string& dir) {
    fs::create_directories(dir);
    const Eigen::Index nodes = P.atoms.empty() ? 0 : P.atoms[0].coeff_window.size();

    json manifest;
    manifest["schema"] = 1;
    manifest["eps"] = P.eps;
    manifest["window_len"] = P.window_len;
    manifest["step"] = P.step;
    manifest["unit_cells"] = P.unit_cells;
    manifest["margin_cells"] = P.margin_cells;
    manifest["window_nodes"] = nodes;
    manifest["atoms"] = P.atoms.size();
    manifest["requested_atoms"] = P.requested_atoms;
    manifest["dropped_atoms"] = P.dropped_atoms;
    manifest["byte_order"] = "little_endian";
    manifest["record"] = "coeff_window then profile_window, float64";
    manifest["provenance"] = {{"model", P.model}, {"seed", P.seed}, {"minimizer", P.minimizer_id}};
    std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';

    std::ofstream bin(fs::path(dir) / "windows.bin", std::ios::binary);
    std::ofstream csv(fs::path(dir) / "atoms.csv");
    csv << "x,weight,m_value,coeff_mean,profile_mean,mean_abs_slope\n";
    char line[256];
    for (const auto& atom : P.atoms) {
        bin.write(reinterpret_cast<const char*>(atom.coeff_window.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(nodes)));
        bin.write(reinterpret_cast<const char*>(atom.profile_window.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(nodes)));
        double slope = 0;
        for (Eigen::Index i = 1; i + 1 < atom.profile_window.size(); ++i)
            slope += std::abs(atom.profile_window[i + 1] - atom.profile_window[i - 1]);
        slope /= 2.0 * P.step * static_cast<double>(nodes - 2);
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", atom.x, atom.weight,
                      atom.m_value, atom.coeff_window.mean(), atom.profile_window.mean(), slope);
        csv << line;
    }
}

EmpiricalMeasure load_measure(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::invalid_argument("no manifest.json under " + dir);
    json manifest = json::parse(mf);

    EmpiricalMeasure P;
    P.eps = manifest.at("eps");
    P.window_len = manifest.at("window_len");
    P.step = manifest.at("step");
    P.unit_cells = manifest.at("unit_cells");
    P.margin_cells = manifest.at("margin_cells");
    P.requested_atoms = manifest.at("requested_atoms");
    P.dropped_atoms = manifest.at("dropped_atoms");
    P.model = manifest.at("provenance").at("model");
    P.seed = manifest.at("provenance").at("seed");
    P.minimizer_id = manifest.at("provenance").at("minimizer");
    const auto natoms = manifest.at("atoms").get<std::size_t>();
    const auto nodes = manifest.at("window_nodes").get<Eigen::Index>();

    std::ifstream bin(fs::path(dir) / "windows.bin", std::ios::binary);
    if (!bin) throw std::invalid_argument("no windows.bin under " + dir);
    std::ifstream csv(fs::path(dir) / "atoms.csv");
    if (!csv) throw std::invalid_argument("no atoms.csv under " + dir);
    std::string header;
    std::getline(csv, header);

    P.atoms.resize(natoms);
    for (auto& atom : P.atoms) {
        atom.coeff_window.resize(nodes);
        atom.profile_window.resize(nodes);
        bin.read(reinterpret_cast<char*>(atom.coeff_window.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(nodes)));
        bin.read(reinterpret_cast<char*>(atom.profile_window.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(nodes)));
        std::string row;
        if (!std::getline(csv, row)) throw std::invalid_argument("atoms.csv shorter than the manifest");
        std::sscanf(row.c_str(), "%lg,%lg,%lg", &atom.x, &atom.weight, &atom.m_value);
    }
    if (!bin) throw std::invalid_argument("windows.bin shorter than the manifest");
    return P;
}

}  // namespace homlab
