#include "chns/workflow.hpp"

#include "chns/error.hpp"
#include "chns/io.hpp"
#include "chns/operators.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

namespace chns {

ScalarField random_perturbation(const Grid& grid, double l2_norm, int smoothing_passes, std::uint64_t seed,
                                const LinearSolveConfig& linear) {
    ScalarField f = random_start(grid, 0.0, 1.0, smoothing_passes, seed, linear);
    const double n = norm_l2(f);
    if (n > 0.0) f *= l2_norm / n;
    return f;
}

VectorField random_solenoidal(const Grid& grid, double l2_norm, std::uint64_t seed, const LinearSolveConfig& linear) {
    VectorField u(grid);
    if (l2_norm == 0.0) return u;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& x : u.flat()) x = dist(rng);
    u.enforce_no_slip();
    u = leray_project(u, linear);
    const double n = norm_l2(u);
    if (n > 0.0) u *= l2_norm / n;
    return u;
}

namespace {

SimState load_matching(const std::filesystem::path& path, const Grid& grid) {
    SimState s = load_checkpoint(path);
    if (!(s.phi.grid() == grid)) {
        throw InvalidArgument("checkpoint " + path.string() + " does not match the configured grid");
    }
    return s;
}

std::string step_name(const char* prefix, std::uint64_t step, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%08llu.%s", prefix, static_cast<unsigned long long>(step), ext);
    return buf;
}

} // namespace

InitialData make_initial_data(const RunConfig& config) {
    const Grid grid = config.grid();
    const auto& ic = config.initial;
    const auto& linear = config.stepper.linear;
    InitialData out;

    ScalarField phi(grid, ic.phi_mean);
    ScalarField sigma(grid, ic.sigma_mean);
    VectorField v = random_solenoidal(grid, ic.velocity, ic.seed + 7, linear);
    switch (ic.kind) {
        case InitialKind::Uniform:
            break;
        case InitialKind::Random:
            phi = random_start(grid, ic.phi_mean, ic.amplitude, ic.smoothing, ic.seed, linear);
            break;
        case InitialKind::File: {
            SimState s = load_matching(ic.file, grid);
            phi = s.phi;
            sigma = s.sigma;
            if (ic.velocity == 0.0) v = s.v;
            break;
        }
        case InitialKind::PerturbedEquilibrium: {
            SimState eq = load_matching(ic.file, grid);
            phi = eq.phi + random_perturbation(grid, ic.amplitude, ic.smoothing, ic.seed, linear);
            sigma = eq.sigma + random_perturbation(grid, ic.amplitude, ic.smoothing, ic.seed + 1, linear);
            out.reference = std::move(eq);
            break;
        }
    }
    if (config.potential.kind == PotentialKind::FloryHuggins && !(phi.max_abs() < 1.0)) {
        throw InvalidArgument("initial phase field leaves (-1, 1), which the Flory-Huggins potential excludes");
    }
    out.state = make_state(std::move(phi), std::move(sigma), config.params, config.potential, &v, linear);
    return out;
}

SimulateSummary simulate(const RunConfig& config, const SimulateOptions& opts) {
    const auto log = [&](const std::string& m) {
        if (opts.log) opts.log(m);
    };
    InitialData init = make_initial_data(config);
    const StepperConfig stepper = config.stepper_for(init.state.phi);
    SimState start = opts.resume ? load_matching(*opts.resume, config.grid()) : init.state;

    const std::filesystem::path dir = config.output.dir;
    std::optional<TimeseriesWriter> csv;
    std::optional<std::ofstream> distance_csv;
    if (opts.write_files) {
        std::filesystem::create_directories(dir);
        csv.emplace(dir / "timeseries.csv");
        if (init.reference) {
            distance_csv.emplace(dir / "distance.csv", std::ios::binary | std::ios::trunc);
            if (!*distance_csv) throw IoError("cannot open " + (dir / "distance.csv").string());
            *distance_csv << "t,distance,l2_v,l2_phi,h1_phi,l2_sigma,dual_phi,dual_sigma\n";
        }
    }

    SimulateSummary summary;
    summary.S = stepper.S;
    summary.min_separation = 1.0;
    log("S = " + format_double(stepper.S) + ", dt = " + format_double(stepper.dt));

    auto on_step = [&](const SimState& s) {
        const DiagnosticsRecord* prev = summary.records.empty() ? nullptr : &summary.records.back();
        DiagnosticsRecord r = make_record(s, config.params, config.potential, prev, config.a1, stepper.linear);
        if (prev && r.E_total - prev->E_total > 1e-12) ++summary.energy_increases;
        summary.min_separation = std::min(summary.min_separation, r.separation);
        summary.records.push_back(r);

        if (init.reference) {
            const auto d = distance_to_equilibrium(s, init.reference->phi, init.reference->sigma, stepper.linear);
            summary.distance_t.push_back(s.t);
            summary.distance.push_back(d);
            if (distance_csv && s.step % config.output.csv_every == 0) {
                *distance_csv << format_double(s.t) << ',' << format_double(d.total()) << ','
                              << format_double(d.l2_v) << ',' << format_double(d.l2_phi) << ','
                              << format_double(d.h1_phi) << ','
                              << format_double(d.l2_sigma) << ',' << format_double(d.dual_phi) << ','
                              << format_double(d.dual_sigma) << '\n';
            }
        }
        if (!opts.write_files) return;
        if (s.step % config.output.csv_every == 0) csv->append(r);
        if (s.step % config.output.snapshot_every == 0) {
            write_vtk_snapshot(s, dir / step_name("snapshot", s.step, "vtk"));
            ++summary.snapshots;
            log("step " + std::to_string(s.step) + "  t = " + format_double(s.t) +
                "  E = " + format_double(r.E_total));
        }
    };

    RunCallbacks cb;
    cb.on_step = on_step;
    if (opts.write_files && config.output.checkpoint_every > 0) {
        cb.checkpoint_every = config.output.checkpoint_every;
        cb.on_checkpoint = [&](const SimState& s) {
            save_checkpoint(s, dir / step_name("checkpoint", s.step, "chns"));
            ++summary.checkpoints;
        };
    }
    summary.final_state = run(std::move(start), stepper, config.t_end, cb);

    if (opts.write_files) {
        const auto& f = summary.final_state;
        if (f.step % config.output.snapshot_every != 0) {
            write_vtk_snapshot(f, dir / step_name("snapshot", f.step, "vtk"));
            ++summary.snapshots;
        }
        save_checkpoint(f, dir / "final.chns");
        csv->flush();
        if (distance_csv) {
            distance_csv->flush();
            if (!*distance_csv) throw IoError("write failed: " + (dir / "distance.csv").string());
        }
    }
    return summary;
}

EquilibrateSummary equilibrate(const RunConfig& config, bool write_files) {
    const Grid grid = config.grid();
    const auto& eq = config.equilibrate;

    ChoFlowOptions flow;
    flow.gamma = eq.gamma;
    flow.dt = eq.dt;
    flow.tol = eq.tol;
    flow.max_steps = eq.max_steps;
    if (config.S) flow.S = *config.S;

    EquilibrateSummary out;
    switch (eq.method) {
        case EquilibrateMethod::Multistart: {
            MinimizeOptions mo;
            mo.n_starts = eq.n_starts;
            mo.seed = eq.seed;
            mo.amplitude = eq.amplitude;
            mo.smoothing_passes = eq.smoothing;
            mo.flow = flow;
            auto r = minimize_energy(grid, config.initial.phi_mean, config.initial.sigma_mean, config.params,
                                     config.potential, mo);
            out.best = std::move(r.best);
            out.candidates = std::move(r.candidates);
            break;
        }
        case EquilibrateMethod::ChoFlow: {
            const auto init = make_initial_data(config);
            out.best = cho_flow(init.state.phi, init.state.sigma, config.params, config.potential, flow);
            out.candidates = {out.best};
            break;
        }
        case EquilibrateMethod::Reduced: {
            const auto init = make_initial_data(config);
            ReducedOptions ro;
            ro.tol = eq.tol;
            ro.max_iter = eq.max_steps;
            out.best = reduced_equilibrium(init.state.phi, mean(init.state.phi), mean(init.state.sigma),
                                           config.params, config.potential, ro);
            out.candidates = {out.best};
            break;
        }
    }
    out.residual = stationary_residual(out.best.phi_inf, out.best.sigma_inf, config.params, config.potential);
    out.state = make_state(out.best.phi_inf, out.best.sigma_inf, config.params, config.potential);

    if (write_files) {
        const std::filesystem::path dir = config.output.dir;
        std::filesystem::create_directories(dir);
        save_checkpoint(out.state, dir / "equilibrium.chns");
        write_vtk_snapshot(out.state, dir / "equilibrium.vtk");
        CsvTable table;
        table.columns = {"index", "energy", "residual", "separation", "iterations", "converged"};
        for (std::size_t i = 0; i < out.candidates.size(); ++i) {
            const auto& c = out.candidates[i];
            table.rows.push_back({double(i), c.energy, c.residual, c.separation, double(c.iterations),
                                  c.converged ? 1.0 : 0.0});
        }
        write_csv(dir / "candidates.csv", table);
    }
    return out;
}

} // namespace chns
