// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "adlearn/dispatch.hpp"
#include "adlearn/experiments.hpp"
#include "adlearn/lp/simplex.hpp"
#include "dispatch_oracle.hpp"
#include "lp_oracle.hpp"

using namespace adl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string case_path(const char* name) {
    return std::string(ADLEARN_CASE_DIR) + "/" + name;
}

ExperimentConfig single_bus() {
    ExperimentConfig c;
    c.system.path = case_path("singlebus.json");
    return c;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stdev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// P(X >= k) for X ~ Binomial(n, 1/2).
double sign_test_p(int k, int n) {
    double p = 0;
    for (int i = k; i <= n; ++i) {
        double c = 1;
        for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
        p += c;
    }
    return p / std::pow(2.0, n);
}

int inversions(const std::vector<double>& v) {
    int n = 0;
    for (std::size_t i = 1; i < v.size(); ++i) n += v[i] < v[i - 1] ? 1 : 0;
    return n;
}

Outcome lp_oracle() {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> rows(1, 6), cols(1, 8);
    int feasible = 0, matched = 0, infeasible = 0, agreed = 0;
    double worst = 0;
    for (int k = 0; k < 200; ++k) {
        const auto lp = oracle::random_lp(rng, rows(rng), cols(rng));
        const auto ref = oracle::enumerate_vertices(lp);
        const auto s = lp::solve(lp);
        if (ref.feasible) {
            ++feasible;
            if (s.optimal()) {
                const double err = std::abs(s.objective - ref.objective);
                worst = std::max(worst, err);
                matched += err <= 1e-8 ? 1 : 0;
            }
        } else {
            ++infeasible;
            agreed += s.status == lp::Status::Infeasible ? 1 : 0;
        }
    }
    return {matched == feasible && agreed == infeasible,
            fmt("%.0f/%.0f feasible within 1e-8 (max err %.1e), ", matched, feasible, worst) +
                fmt("%.0f/%.0f infeasible agree", agreed, infeasible)};
}

Outcome dispatch_oracle() {
    const SystemCase sc = single_bus().system.load();
    const DispatchModel m(sc);
    oracle::SingleBus sb;
    for (const auto& g : sc.generators) sb.units.push_back({g.capacity, g.cost, g.rbar_up, g.rbar_dn, g.p_up, g.p_dn});
    sb.shed = sc.penalties.load_shed;
    sb.spill = sc.penalties.spill;
    const oracle::PlanningDual dual(sb);
    int ok = 0, n = 0;
    double worst = 0;
    for (double D : {-1.0, 2.0, 6.0, 10.0, 15.0})
        for (double up : {0.0, 1.0, 2.5, 4.0, 6.0})
            for (double dn : {0.0, 3.0}) {
                const auto plan = solve_planning(m, Eigen::VectorXd::Constant(1, D), Eigen::VectorXd::Constant(1, up),
                                                 Eigen::VectorXd::Constant(1, dn));
                const double err = std::abs(plan.objective - dual.optimum(D, up, dn));
                worst = std::max(worst, err);
                ok += err <= 1e-8 ? 1 : 0;
                ++n;
            }
    return {ok == n && n == 50, fmt("%.0f/%.0f grid points within 1e-8 (max err %.1e)", ok, n, worst)};
}

Outcome in_sample_dominance() {
    ExperimentConfig c = single_bus();
    c.T = {50, 200};
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.variants = {Variant::OptOpt, Variant::LsOpt};
    const auto runs = run_training(c, c.system.load());
    int ok = 0;
    double worst = -1e300;
    for (const auto& r : runs) {
        const double excess = r.result.cost - r.result.ls_cost;
        worst = std::max(worst, excess);
        ok += excess <= 1e-9 ? 1 : 0;
    }
    return {ok == static_cast<int>(runs.size()),
            fmt("%.0f/%.0f runs at or below LS-Ex (max excess %.2e)", ok, static_cast<double>(runs.size()), worst)};
}

struct OutOfSample {
    std::vector<double> ls, opt, ls_err, opt_err;
};

// Training at T=500 on 10 seeds, evaluation on one fixed 10,000-point set.
const OutOfSample& out_of_sample_runs() {
    static OutOfSample r = [] {
        ExperimentConfig c = single_bus();
        c.T = {500};
        c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        c.variants = {Variant::LsEx, Variant::OptOpt};
        const SystemCase sc = c.system.load();
        const DispatchModel model(sc);
        const Dataset eval = evaluation_data(c, sc);
        OutOfSample out;
        for (const auto& run : run_training(c, sc)) {
            const EvalRow e = evaluate_run(run, model, eval, 1);
            auto& cost = run.variant == Variant::LsEx ? out.ls : out.opt;
            auto& err = run.variant == Variant::LsEx ? out.ls_err : out.opt_err;
            cost.push_back(e.eval_cost);
            err.push_back(e.error_mean);
        }
        return out;
    }();
    return r;
}

Outcome out_of_sample() {
    const auto& r = out_of_sample_runs();
    int better = 0;
    for (std::size_t i = 0; i < r.ls.size(); ++i) better += r.opt[i] < r.ls[i] ? 1 : 0;
    const double p = sign_test_p(better, static_cast<int>(r.ls.size()));
    const bool pass = mean(r.opt) < mean(r.ls) && p <= 0.05;
    return {pass, fmt("mean Opt-Opt %.4f vs LS-Ex %.4f, %.0f/10 seeds better, sign test p=%.4f", mean(r.opt),
                      mean(r.ls), better, p)};
}

Outcome bias_direction() {
    const auto& r = out_of_sample_runs();
    int negative = 0;
    for (double e : r.opt_err) negative += e < 0 ? 1 : 0;
    const double m = mean(r.ls_err), se = stdev(r.ls_err) / std::sqrt(static_cast<double>(r.ls_err.size()));
    const bool pass = negative >= 8 && std::abs(m) <= 3 * se;
    return {pass, fmt("Opt-Opt error < 0 in %.0f/10 seeds; LS mean error %.4f, 3 SE = %.4f", negative, m, 3 * se)};
}

Outcome exact_vs_heuristic() {
    ExperimentConfig c = single_bus();
    c.exact.gap = 1e-3;
    c.exact.time_limit = 330.0;
    const SystemCase sc = c.system.load();
    int in_range = 0, converged = 0;
    std::string ratios;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ExactRow r = run_exact(c, sc, seed, 15, Variant::OptOpt);
        const double q = r.ratio();
        in_range += q >= 1 - 1e-6 && q <= 1.05 ? 1 : 0;
        converged += r.exact.gap <= 1e-3 ? 1 : 0;
        ratios += fmt(" %.4f", q);
        std::fprintf(stderr, "  exact seed %d: heuristic %.6f exact %.6f gap %.2e nodes %.0f\n",
                     static_cast<int>(seed), r.heuristic, r.exact.objective, r.exact.gap,
                     static_cast<double>(r.exact.nodes));
    }
    return {in_range >= 8 && converged == 10,
            fmt("ratio in range %.0f/10, gap <= 0.1%% in %.0f/10; ratios", in_range, converged) + ratios};
}

Outcome deficit_sweep() {
    ExperimentConfig c = single_bus();
    c.T = {1000};
    c.seeds = {1};
    c.deficit_costs = {15, 40, 70, 100};
    const auto rows = run_deficit_sweep(c);
    std::vector<double> ss, up;
    std::string detail = "steady state / R_up:";
    for (const auto& r : rows) {
        ss.push_back(r.steady_state);
        up.push_back(r.r_up);
        detail += fmt(" %.0f:%.3f/%.3f", r.deficit_cost, r.steady_state, r.r_up);
    }
    return {inversions(ss) <= 1 && inversions(up) <= 1, detail};
}

Outcome stabilization() {
    ExperimentConfig c = single_bus();
    c.T = {100, 800};
    c.variants = {Variant::OptOpt};
    c.seeds.clear();
    for (std::uint64_t s = 1; s <= 20; ++s) c.seeds.push_back(s);
    const auto runs = run_training(c, c.system.load());
    std::map<Index, std::vector<Eigen::VectorXd>> theta;
    for (const auto& r : runs) theta[r.T].push_back(r.result.theta);
    const Index d = theta[100].front().size();
    bool pass = true;
    std::string detail = "std T=100 -> T=800:";
    for (Index i = 0; i < d; ++i) {
        std::vector<double> a, b;
        for (const auto& t : theta[100]) a.push_back(t(i));
        for (const auto& t : theta[800]) b.push_back(t(i));
        pass = pass && stdev(b) <= stdev(a);
        detail += fmt(" %.4f->%.4f", stdev(a), stdev(b));
    }
    return {pass, detail};
}

Outcome dynamic_reserves() {
    ExperimentConfig c = single_bus();
    c.process.heteroscedastic = true;
    c.T = {500};
    c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    c.variants = {Variant::LsOpt};
    const SystemCase sc = c.system.load();
    const DispatchModel model(sc);
    const Dataset eval = evaluation_data(c, sc);
    const auto fixed = run_training(c, sc);
    c.reserve_features = {"E"};
    const auto dynamic = run_training(c, sc);
    int better = 0;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        a.push_back(evaluate_run(fixed[i], model, eval, 1).eval_cost);
        b.push_back(evaluate_run(dynamic[i], model, eval, 1).eval_cost);
        better += b.back() < a.back() ? 1 : 0;
    }
    return {better >= 7,
            fmt("dynamic better on %.0f/10 seeds (mean %.4f vs constant %.4f)", better, mean(b), mean(a))};
}

Outcome multi_bus() {
    ExperimentConfig c;
    c.system.path = case_path("ieee24.json");
    c.system.demand_factor = 0.9;
    c.T = {200};
    c.seeds = {1, 2, 3};
    c.eval_T = 2000;
    c.train.time_limit = 900.0;
    c.variants = {Variant::LsEx, Variant::OptOpt};
    const SystemCase sc = c.system.load();
    const DispatchModel model(sc);
    const Dataset eval = evaluation_data(c, sc);
    const auto runs = run_training(c, sc);
    int dominated = 0, improved = 0;
    std::string detail;
    for (std::size_t i = 0; i + 1 < runs.size(); i += 2) {
        const auto& ls = runs[i];
        const auto& opt = runs[i + 1];
        dominated += opt.result.cost <= ls.result.cost + 1e-9 ? 1 : 0;
        const double a = evaluate_run(ls, model, eval, 1).eval_cost, b = evaluate_run(opt, model, eval, 1).eval_cost;
        improved += b <= a ? 1 : 0;
        detail += fmt(" seed %.0f: in %.3f/%.3f", static_cast<double>(ls.seed), opt.result.cost, ls.result.cost) +
                  fmt(" out %.3f/%.3f;", b, a);
    }
    return {dominated == 3 && improved >= 2,
            fmt("in-sample %.0f/3, out-of-sample %.0f/3 (Opt-Opt/LS-Ex):", dominated, improved) + detail};
}

struct Criterion {
    int id;
    const char* name;
    double limit;  // seconds
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "LP oracle equivalence", 10, lp_oracle},
        {2, "dispatch oracle", 5, dispatch_oracle},
        {3, "in-sample dominance", 300, in_sample_dominance},
        {4, "out-of-sample improvement", 1800, out_of_sample},
        {5, "bias direction", 1800, bias_direction},
        {6, "exact vs heuristic", 3600, exact_vs_heuristic},
        {7, "deficit sweep trend", 1800, deficit_sweep},
        {8, "estimator stabilization", 3600, stabilization},
        {9, "dynamic reserves", 1800, dynamic_reserves},
        {10, "multi-bus smoke", 3600, multi_bus},
    };
    std::set<int> pick;
    for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!pick.empty() && !pick.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.pass && s <= c.limit;
        failed += pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s [%.1fs, limit %.0fs]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), s, c.limit);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
