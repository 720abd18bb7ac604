// cdds: command-line front end.
//
//   cdds analyze  --system sys.json [--theorem 1|2|both] [--certificate out.json] [--out report.json]
//   cdds simulate --system sys.json [--tfinal T] [--steps-per-delay N] [--certificate c.json] [--seed S] [--out traj.csv]
//   cdds export   --system sys.json --theorem 1|2 [--out problem.dat-s]
//
// Exit codes: 0 feasible / success, 1 input error, 2 infeasible within the
// variable bound, 3 indeterminate, 4 simulation diverged.

#include "cdds/cdds.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using cdds::OrderedJson;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitIndeterminate = 3;
constexpr int kExitDiverged = 4;

struct Common {
    std::string system;
    std::string supply;  // "", "hinf" or "custom"
    std::optional<double> gamma;
    std::string out;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

cdds::SystemDescription load(const Common& c, bool need_supply = true) {
    cdds::SystemDescription sys = cdds::load_system(c.system);
    if (c.supply == "hinf") {
        if (!c.gamma) throw cdds::InputError("--gamma", "required with --supply hinf");
        if (!(*c.gamma > 0.0)) throw cdds::InputError("--gamma", "must be positive");
        sys.supply = cdds::supply_hinf(*c.gamma, sys.model.m, sys.model.q);
    } else if (c.supply == "custom") {
        const auto doc = cdds::read_json_file(c.system);
        if (!doc.contains("supply") || doc["supply"].contains("preset")) {
            throw cdds::InputError("supply", "--supply custom needs explicit j1, j2, j3 blocks in the system file");
        }
    } else if (c.gamma) {
        sys.supply = cdds::supply_hinf(*c.gamma, sys.model.m, sys.model.q);
    }
    if (need_supply && !sys.supply) {
        throw cdds::InputError("supply", "missing field (or pass --supply hinf --gamma G)");
    }
    return sys;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw cdds::InputError("--out", "cannot write " + path);
    f << text;
}

int exit_code(cdds::Verdict v) {
    switch (v) {
        case cdds::Verdict::feasible:
            return kExitOk;
        case cdds::Verdict::infeasible_within_bound:
            return kExitInfeasible;
        default:
            return kExitIndeterminate;
    }
}

struct TheoremRun {
    int theorem = 1;
    bool schur = true;
    cdds::SolveOutcome outcome;
    double seconds = 0.0;
};

TheoremRun run_theorem(const cdds::SystemDescription& sys, int theorem) {
    const auto t0 = std::chrono::steady_clock::now();
    TheoremRun run;
    run.theorem = theorem;
    const cdds::LmiProblem prob = theorem == 1 ? cdds::build_theorem1(sys.model, *sys.supply)
                                               : cdds::build_theorem2(sys.model, *sys.supply);
    run.schur = prob.schur_form;
    run.outcome = cdds::solve(prob);
    run.seconds = seconds_since(t0);
    return run;
}

OrderedJson theorem_report(const TheoremRun& run) {
    const auto& o = run.outcome;
    OrderedJson j;
    j["theorem"] = run.theorem;
    j["form"] = run.schur ? "schur" : "direct";
    j["verdict"] = cdds::to_string(o.verdict);
    j["t_star"] = o.t_star;
    j["upper_bound"] = o.upper_bound;
    j["achieved_margin"] = o.achieved_margin;
    j["iterations"] = o.iterations;
    j["converged"] = o.converged;
    OrderedJson margins = OrderedJson::array();
    for (const auto& m : o.margins) {
        OrderedJson e;
        e["constraint"] = m.name;
        e["margin"] = m.margin;
        e["pass"] = m.pass;
        margins.push_back(std::move(e));
    }
    j["margins"] = std::move(margins);
    j["certificate_digest"] = o.certificate ? OrderedJson(cdds::certificate_digest(*o.certificate)) : OrderedJson();
    j["diagnostics"] = o.diagnostics;
    j["seconds"] = run.seconds;
    return j;
}

int cmd_analyze(const Common& c, const std::string& theorem, const std::string& cert_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const cdds::SystemDescription sys = load(c);

    std::vector<TheoremRun> runs;
    if (theorem == "both") {
        auto second = std::async(std::launch::async, [&sys] { return run_theorem(sys, 2); });
        runs.push_back(run_theorem(sys, 1));
        runs.push_back(second.get());
    } else {
        runs.push_back(run_theorem(sys, theorem == "1" ? 1 : 2));
    }

    OrderedJson report;
    report["command"] = "analyze";
    report["system"] = c.system;
    report["model_hash"] = hex64(cdds::model_hash(sys.model));
    report["dimensions"] = {{"n", sys.model.n}, {"nu", sys.model.nu}, {"m", sys.model.m},
                            {"q", sys.model.q}, {"d", sys.model.d()}, {"r", sys.model.r}};
    OrderedJson theorems = OrderedJson::array();
    for (const auto& run : runs) theorems.push_back(theorem_report(run));
    report["theorems"] = std::move(theorems);

    // Congruence between the two dissipation forms, at the first certificate
    // found or at P = I, S = U = I otherwise.
    if (sys.supply->strict() && sys.supply->m() > 0) {
        const auto& m = sys.model;
        cdds::Mat p = cdds::eye(m.n + m.rho());
        cdds::Mat s = cdds::eye(m.nu);
        cdds::Mat u = cdds::eye(m.nu);
        for (const auto& run : runs) {
            if (run.outcome.certificate) {
                p = run.outcome.certificate->p;
                s = run.outcome.certificate->s;
                u = run.outcome.certificate->u;
                break;
            }
        }
        report["congruence_residual"] = cdds::congruence_check(m, *sys.supply, p, s, u);
    } else {
        report["congruence_residual"] = nullptr;
    }

    cdds::Verdict overall = runs.front().outcome.verdict;
    for (const auto& run : runs) {
        if (run.outcome.verdict != overall) overall = cdds::Verdict::indeterminate;
    }
    report["verdict"] = cdds::to_string(overall);
    report["timings"] = {{"total_seconds", seconds_since(t0)}};

    if (!cert_path.empty()) {
        const TheoremRun* with_cert = nullptr;
        for (const auto& run : runs) {
            if (run.outcome.certificate) {
                with_cert = &run;
                break;
            }
        }
        if (with_cert != nullptr) {
            write_text(cert_path,
                       cdds::certificate_to_json(*with_cert->outcome.certificate, cdds::model_hash(sys.model)).dump(2) +
                           "\n");
            report["certificate_file"] = cert_path;
        } else {
            report["certificate_file"] = nullptr;
        }
    }

    const std::string text = report.dump(2) + "\n";
    if (c.out.empty()) {
        std::cout << text;
    } else {
        write_text(c.out, text);
    }
    return exit_code(overall);
}

int cmd_simulate(const Common& c, double t_final, long steps, const std::string& cert_path,
                 std::optional<std::uint64_t> seed) {
    const cdds::SystemDescription sys = load(c, false);
    const auto& m = sys.model;
    std::optional<cdds::Certificate> cert;
    if (!cert_path.empty()) {
        try {
            cert = cdds::certificate_from_json(cdds::read_json_file(cert_path), m);
        } catch (const cdds::InputError& e) {
            throw cdds::InputError("certificate." + e.field(), e.what());
        }
    }
    const cdds::SignalFn w = seed ? cdds::band_limited_disturbance(m.q, *seed)
                                  : cdds::constant_signal(cdds::Vec::Zero(m.q));
    cdds::Trajectory traj;
    try {
        traj = cdds::integrate(m, sys.simulation.x0, cdds::constant_signal(sys.simulation.phi), w, t_final, steps, cert,
                               sys.supply);
    } catch (const cdds::SimulationDiverged& e) {
        std::cerr << "cdds: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::invalid_argument& e) {
        throw cdds::InputError("", e.what());
    }

    std::ostringstream csv;
    cdds::write_csv(csv, traj);
    OrderedJson report;
    report["command"] = "simulate";
    report["system"] = c.system;
    report["model_hash"] = hex64(cdds::model_hash(m));
    report["t_final"] = traj.t.back();
    report["steps_per_delay"] = steps;
    report["samples"] = traj.size();
    const cdds::Vec& xf = traj.x.back();
    report["final_x"] = std::vector<double>(xf.data(), xf.data() + xf.size());
    if (cert) {
        const auto res = cdds::dissipation_residuals(traj);
        double vmax = 0.0;
        for (double v : traj.v) vmax = std::max(vmax, std::abs(v));
        double worst = -std::numeric_limits<double>::infinity();
        for (double r : res) worst = std::max(worst, r);
        const double tol = 1e-5 * (1.0 + vmax);
        report["dissipation"] = {{"windows", res.size()},
                                 {"max_residual", res.empty() ? OrderedJson() : OrderedJson(worst)},
                                 {"tolerance", tol},
                                 {"max_abs_v", vmax},
                                 {"pass", res.empty() || worst <= tol}};
    }
    if (c.out.empty()) {
        std::cout << csv.str();
        std::cerr << report.dump(2) << "\n";
    } else {
        write_text(c.out, csv.str());
        std::cout << report.dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_export(const Common& c, const std::string& theorem) {
    const cdds::SystemDescription sys = load(c);
    const cdds::LmiProblem prob = theorem == "1" ? cdds::build_theorem1(sys.model, *sys.supply)
                                                 : cdds::build_theorem2(sys.model, *sys.supply);
    const std::string text = cdds::export_sdpa(prob);
    if (c.out.empty()) {
        std::cout << text;
    } else {
        write_text(c.out, text);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dissipativity and stability certificates for coupled differential-difference systems"};
    app.require_subcommand(1);

    Common common;
    std::string theorem = "both";
    std::string export_theorem;
    std::string cert_path;
    double t_final = 10.0;
    long steps = 64;
    std::optional<std::uint64_t> seed;

    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("--system", common.system, "system description (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--supply", common.supply, "supply rate: hinf or custom")
            ->check(CLI::IsMember({"hinf", "custom"}));
        sub->add_option("--gamma", common.gamma, "H-infinity level for --supply hinf");
        sub->add_option("--out", common.out, "output file");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "solve the stability/dissipativity LMIs");
    add_common(analyze);
    analyze->add_option("--theorem", theorem, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));
    analyze->add_option("--certificate", cert_path, "write the certificate here when one is found");

    CLI::App* simulate = app.add_subcommand("simulate", "integrate the system and check dissipation");
    add_common(simulate);
    simulate->add_option("--tfinal", t_final, "final time")->check(CLI::PositiveNumber);
    simulate->add_option("--steps-per-delay", steps, "RK4 steps per delay interval (even, >= 32)");
    simulate->add_option("--certificate", cert_path, "certificate to evaluate the functional with");
    simulate->add_option("--seed", seed, "seed of a band-limited disturbance (default w = 0)");

    CLI::App* exporter = app.add_subcommand("export", "write the LMI problem in SDPA sparse format");
    add_common(exporter);
    exporter->add_option("--theorem", export_theorem, "1 or 2")->required()->check(CLI::IsMember({"1", "2"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(common, theorem, cert_path);
        if (simulate->parsed()) return cmd_simulate(common, t_final, steps, cert_path, seed);
        if (exporter->parsed()) return cmd_export(common, export_theorem);
    } catch (const cdds::InputError& e) {
        std::cerr << "cdds: input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "cdds: input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::domain_error& e) {
        std::cerr << "cdds: input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "cdds: error: " << e.what() << "\n";
        return kExitIndeterminate;
    }
    return kExitInput;
}
