#pragma once

// The ring-array tomography experiment (single sources vs simultaneous
// pairs, stacked detector traces, singular-value spectrum) and the
// vanishing-viscosity sweep.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/SVD>

#include "kwk/diagnostics.hpp"

namespace kwk {

struct TransducerArray {
    int n_elements = 0;
    std::vector<std::array<double, 3>> positions;  // m
    std::vector<std::int64_t> cells;
    std::vector<int> source_capable;  // element indices
    double tone_hz = 0.0;
    double amplitude = 0.0;  // Pa-equivalent piston strength

    // Equally spaced ring; the first n_sources elements in alternating
    // angular order are source-capable.
    static TransducerArray ring(const Grid& g, std::array<double, 3> center, double radius,
                                int n_elements, int n_sources, double tone_hz, double amplitude) {
        if (n_elements < 2 || n_sources < 1 || n_sources > n_elements)
            throw validation_error("ring array: need 2+ elements and 1..n source-capable");
        if (g.ndim != 2) throw validation_error("ring array: 2D grids only");
        TransducerArray arr;
        arr.n_elements = n_elements;
        arr.tone_hz = tone_hz;
        arr.amplitude = amplitude;
        for (int e = 0; e < n_elements; ++e) {
            const double th = 2.0 * M_PI * e / n_elements;
            std::array<double, 3> pos{center[0] + radius * std::cos(th),
                                      center[1] + radius * std::sin(th), 0.0};
            for (int a = 0; a < g.ndim; ++a)
                if (pos[a] <= 0.0 || pos[a] >= g.length(a))
                    throw validation_error("ring array: element " + std::to_string(e) +
                                           " falls outside the domain");
            arr.positions.push_back(pos);
            int ix = std::clamp(static_cast<int>(pos[0] / g.spacing[0]), 0, g.dims[0] - 1);
            int iy = std::clamp(static_cast<int>(pos[1] / g.spacing[1]), 0, g.dims[1] - 1);
            arr.cells.push_back(g.cell_index(ix, iy));
        }
        // alternate around the ring: 8 elements / 4 sources -> every other one
        const int stride = std::max(1, n_elements / n_sources);
        for (int s = 0; s < n_sources; ++s) arr.source_capable.push_back((s * stride) % n_elements);
        std::sort(arr.source_capable.begin(), arr.source_capable.end());
        return arr;
    }
};

// One simulation of the plan: a set of driven elements, recording all others.
struct ExperimentRun {
    std::vector<int> sources;    // element indices driven in-phase
    std::vector<int> detectors;  // non-driving elements
    std::string label;
};

struct RunPlan {
    TransducerArray array;
    std::vector<ExperimentRun> runs;
    int total_traces = 0;
};

struct DataMatrix {
    Mat rows;  // one detector trace per row
    std::vector<std::string> labels;
};

// Enumerates singles then pairs, detectors ascending; deterministic label
// order. Row count: sum over source sets of (n_elements - |set|).
inline RunPlan build_run_plan(TransducerArray arr) {
    RunPlan plan;
    plan.array = std::move(arr);
    const auto& sc = plan.array.source_capable;
    auto add = [&](std::vector<int> srcs) {
        ExperimentRun r;
        r.sources = std::move(srcs);
        std::ostringstream lab;
        lab << "s";
        for (std::size_t i = 0; i < r.sources.size(); ++i)
            lab << (i ? "+" : "") << r.sources[i];
        r.label = lab.str();
        for (int e = 0; e < plan.array.n_elements; ++e)
            if (std::find(r.sources.begin(), r.sources.end(), e) == r.sources.end())
                r.detectors.push_back(e);
        plan.total_traces += static_cast<int>(r.detectors.size());
        plan.runs.push_back(std::move(r));
    };
    for (int s : sc) add({s});
    for (std::size_t i = 0; i < sc.size(); ++i)
        for (std::size_t j = i + 1; j < sc.size(); ++j) add({sc[i], sc[j]});
    return plan;
}

struct RingParams {
    std::array<double, 3> center{0.15, 0.15, 0.0};
    double radius = 0.08;
    int n_elements = 8;
    int n_sources = 4;
    double tone_hz = 25e3;
    double amplitude = 0.0;
};

// Points-per-wavelength check at the drive frequency (warn below 6).
inline double points_per_wavelength(const Grid& g, const MediumFields& m, double freq) {
    const double cmin = std::sqrt(m.c0sq.minCoeff());
    const double hmax = *std::max_element(g.spacing.begin(), g.spacing.begin() + g.ndim);
    return cmin / freq / hmax;
}

inline RunPlan build_ring_experiment(const Grid& g, const MediumFields& m, const RingParams& rp,
                                     std::vector<std::string>* warnings = nullptr) {
    if (warnings) {
        const double ppw = points_per_wavelength(g, m, rp.tone_hz);
        if (ppw < 6.0) {
            std::ostringstream os;
            os << "ring experiment: only " << ppw << " grid points per wavelength (< 6)";
            warnings->push_back(os.str());
        }
    }
    TransducerArray arr = TransducerArray::ring(g, rp.center, rp.radius, rp.n_elements,
                                                rp.n_sources, rp.tone_hz, rp.amplitude);
    return build_run_plan(std::move(arr));
}

inline int plan_threads(std::size_t n_runs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("KWK_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
    }
    return static_cast<int>(std::min<std::size_t>(hw, n_runs));
}

// Executes every run of the plan (concurrently up to KWK_THREADS) and stacks
// detector traces row-wise in deterministic label order.
inline DataMatrix run_experiment(const Problem& pb, const SolverConfig& sc, const RunPlan& plan) {
    const auto n_runs = plan.runs.size();
    std::vector<Mat> traces(n_runs);
    std::vector<std::string> errors(n_runs);

    auto worker = [&](std::size_t r) {
        const auto& er = plan.runs[r];
        try {
            std::vector<SourceTerm::MaskPoint> pts;
            for (int s : er.sources)
                pts.push_back({plan.array.cells[s], plan.array.amplitude});
            SourceTerm src = SourceTerm::tone(std::move(pts), plan.array.tone_hz);
            Problem local(pb, std::move(src));
            ProbeSet probes;
            for (int d : er.detectors) probes.cells.push_back(plan.array.cells[d]);
            Trajectory tr = run(local, sc, InitialData{}, probes, /*store_stride=*/0);
            traces[r] = tr.probe_p;
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    };

    const int nthreads = plan_threads(n_runs);
    if (nthreads <= 1) {
        for (std::size_t r = 0; r < n_runs; ++r) worker(r);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mtx;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t r;
                    {
                        std::lock_guard<std::mutex> lk(mtx);
                        if (next >= n_runs) return;
                        r = next++;
                    }
                    worker(r);
                }
            });
        for (auto& th : pool) th.join();
    }
    for (std::size_t r = 0; r < n_runs; ++r)
        if (!errors[r].empty())
            throw numerical_error("experiment run '" + plan.runs[r].label +
                                  "' failed: " + errors[r]);

    DataMatrix dm;
    const auto cols = traces.empty() ? 0 : traces[0].cols();
    dm.rows.resize(plan.total_traces, cols);
    int row = 0;
    for (std::size_t r = 0; r < n_runs; ++r) {
        const auto& er = plan.runs[r];
        for (std::size_t d = 0; d < er.detectors.size(); ++d) {
            dm.rows.row(row) = traces[r].row(static_cast<int>(d));
            dm.labels.push_back(er.label + ":d" + std::to_string(er.detectors[d]));
            ++row;
        }
    }
    return dm;
}

// Full singular-value spectrum, descending, normalized to the largest.
inline Vec svd_spectrum(const Mat& m) {
    if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
        throw validation_error("svd_spectrum: zero data matrix");
    Eigen::BDCSVD<Mat> svd(m);
    Vec s = svd.singularValues();
    return s / s[0];
}

struct SweepEntry {
    double mu = 0.0;
    double dist_to_next = 0.0;  // trajectory distance to the next-smaller mu
    double dist_to_inviscid = 0.0;
    double sup_energy = 0.0;
};

struct SweepReport {
    std::vector<SweepEntry> entries;  // descending mu, then mu = 0 last
    bool distances_decreasing = true;
    double energy_spread = 0.0;  // (max-min)/max of sup_energy over the sweep
};

// L_inf-in-time L2 distance between two stored trajectories.
inline double trajectory_distance(const Problem& pb, const Trajectory& a, const Trajectory& b) {
    if (a.samples.size() != b.samples.size())
        throw validation_error("trajectory_distance: sample counts differ");
    double du = 0.0, ds = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        FaceField df = a.samples[k].u;
        df -= b.samples[k].u;
        du = std::max(du, norm_faces(pb.grid, df));
        Vec dsig = pb.bases.weighted.reconstruct(
            Vec(a.samples[k].sigma_modal - b.samples[k].sigma_modal));
        ds = std::max(ds, norm_cells(pb.grid, dsig));
    }
    return du + ds;
}

// Runs the base configuration at each viscosity (descending) plus mu = 0 and
// reports pairwise distances, distances to the inviscid run, and the energy
// sup across the sweep. Requires constant rho0 (g = h = 0) and y > d.
inline SweepReport viscosity_sweep(const Problem& pb, const SolverConfig& base,
                                   const InitialData& init, std::vector<double> mu_list) {
    if (!pb.media.rho0_constant)
        throw validation_error("viscosity_sweep: rho0 must be constant (g = h = 0)");
    if (!(pb.media.y > pb.grid.ndim))
        throw validation_error("viscosity_sweep: requires y > d");
    std::sort(mu_list.begin(), mu_list.end(), std::greater<>());
    if (!mu_list.empty() && mu_list.back() == 0.0) mu_list.pop_back();

    std::vector<Trajectory> trajs;
    std::vector<double> mus = mu_list;
    mus.push_back(0.0);
    for (double mu : mus) {
        SolverConfig sc = base;
        sc.mu = mu;
        trajs.push_back(run(pb, sc, init, ProbeSet{}, 1));
    }
    const Trajectory& inviscid = trajs.back();

    SweepReport rep;
    double emax = 0.0, emin = 0.0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
        SweepEntry e;
        e.mu = mus[i];
        SolverConfig sc = base;
        sc.mu = mus[i];
        e.sup_energy = energy_dissipation(pb, trajs[i], sc).sup_energy;
        if (i + 1 < mus.size()) e.dist_to_next = trajectory_distance(pb, trajs[i], trajs[i + 1]);
        e.dist_to_inviscid = trajectory_distance(pb, trajs[i], inviscid);
        rep.entries.push_back(e);
        emax = (i == 0) ? e.sup_energy : std::max(emax, e.sup_energy);
        emin = (i == 0) ? e.sup_energy : std::min(emin, e.sup_energy);
    }
    for (std::size_t i = 0; i + 2 < rep.entries.size(); ++i)
        if (rep.entries[i].dist_to_inviscid <= rep.entries[i + 1].dist_to_inviscid)
            rep.distances_decreasing = false;
    rep.energy_spread = (emax - emin) / std::max(emax, 1e-300);
    return rep;
}

}  // namespace kwk
