#include "berglab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace berglab {

using nlohmann::json;

namespace {

const char* kVersion = "berglab 1.0.0";
constexpr double kInf = std::numeric_limits<double>::infinity();

class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }
    std::optional<Reader> section(const char* key) {
        seen_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Reader(j_.at(key), where_ + "." + key);
    }
    void finish() const {
        for (auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    Reader root(j, "config");
    if (auto w = root.section("weight")) {
        w->get("family", c.weight_family);
        w->get("c", c.weight_c);
        w->get("beta", c.weight_beta);
        w->get("csv", c.weight_csv);
        w->finish();
    }
    auto& k = c.construct;
    root.get("epsilon0", k.epsilon0);
    root.get("kappa", k.kappa);
    if (auto m = root.section("minorant")) {
        m->get("x_max", k.x_max);
        m->get("grid_step", k.grid_step);
        m->finish();
    }
    if (auto l = root.section("levels")) {
        l->get("count", k.levels);
        l->get("x1", k.x1);
        l->get("log_spacing", k.log_spacing);
        l->get("x_floor", k.x_floor);
        l->finish();
    }
    root.get("gamma_tol", k.gamma_tol);
    if (auto e = root.section("eta_net")) {
        e->get("radial", k.eta_net_radial);
        e->get("angular", k.eta_net_angular);
        e->finish();
    }
    if (auto m = root.section("moments")) {
        m->get("max_n", c.moments_max_n);
        m->finish();
    }
    if (auto l = root.section("lattice")) {
        l->get("kappa", c.lattice_kappa);
        l->get("x", c.lattice_x);
        l->get("r", c.lattice_r);
        l->get("eps", c.lattice_eps);
        l->get("perturbed_eps", c.lattice_perturbed_eps);
        l->get("seed", c.lattice_seed);
        l->finish();
    }
    if (auto p = root.section("pair")) {
        p->get("offset", c.pair_offset);
        p->get("max_degree", c.pair_max_degree);
        p->finish();
    }
    if (auto s = root.section("smooth")) {
        s->get("pairs", c.smooth.pairs);
        s->get("seed", c.smooth.seed);
        s->get("coarse_radial", c.smooth.coarse_radial);
        s->get("coarse_angular", c.smooth.coarse_angular);
        if (auto m = s->section("resolvent_mesh")) {
            m->get("cells_per_unit", c.resolvent_mesh.cells_per_unit);
            m->get("levels_per_octave", c.resolvent_mesh.levels_per_octave);
            m->get("gl_nodes", c.resolvent_mesh.gl_nodes);
            m->get("angular", c.resolvent_mesh.angular);
            m->finish();
        }
        s->finish();
    }
    if (auto y = root.section("cyclicity")) {
        y->get("max_degree", c.cyclicity_max_degree);
        y->get("levels_per_octave", c.gram_levels_per_octave);
        y->finish();
    }
    if (auto o = root.section("outputs")) {
        o->get("dir", c.out_dir);
        o->finish();
    }
    root.finish();

    static const std::set<std::string> families{"unit", "single_exp", "double_exp", "csv"};
    require(families.count(c.weight_family), "weight.family must be one of unit, single_exp, double_exp, csv");
    require(c.weight_family != "csv" || !c.weight_csv.empty(), "weight.csv is required for the csv family");
    require(c.weight_c > 0 && c.weight_beta > 0, "weight.c and weight.beta must be positive");
    require(k.epsilon0 > 0 && k.epsilon0 < 1, "epsilon0 must lie in (0,1)");
    require(k.kappa >= 0 && k.kappa < 1, "kappa must lie in [0,1)");
    require(k.levels >= 1 && k.levels <= 8, "levels.count must lie in [1,8]");
    require(c.moments_max_n >= 0 && c.moments_max_n <= 100000, "moments.max_n out of range");
    require(c.cyclicity_max_degree >= 0 && c.cyclicity_max_degree <= 1000, "cyclicity.max_degree out of range");
    require(c.pair_max_degree >= 0 && c.pair_max_degree <= 1000, "pair.max_degree out of range");
    require(c.smooth.pairs >= 1, "smooth.pairs must be positive");
    require(c.gram_levels_per_octave >= 1, "cyclicity.levels_per_octave must be positive");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config " + p.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    auto c = config_from_json(j);
    if (c.weight_family == "csv" && std::filesystem::path(c.weight_csv).is_relative())
        c.weight_csv = (p.parent_path() / c.weight_csv).string();
    return c;
}

json config_to_json(const ExperimentConfig& c, bool with_outputs) {
    auto& k = c.construct;
    json j = {
        {"weight", {{"family", c.weight_family}, {"c", c.weight_c}, {"beta", c.weight_beta}, {"csv", c.weight_csv}}},
        {"epsilon0", k.epsilon0},
        {"kappa", k.kappa},
        {"minorant", {{"x_max", k.x_max}, {"grid_step", k.grid_step}}},
        {"levels", {{"count", k.levels}, {"x1", k.x1}, {"log_spacing", k.log_spacing}, {"x_floor", k.x_floor}}},
        {"gamma_tol", k.gamma_tol},
        {"eta_net", {{"radial", k.eta_net_radial}, {"angular", k.eta_net_angular}}},
        {"moments", {{"max_n", c.moments_max_n}}},
        {"lattice",
         {{"kappa", c.lattice_kappa},
          {"x", c.lattice_x},
          {"r", c.lattice_r},
          {"eps", c.lattice_eps},
          {"perturbed_eps", c.lattice_perturbed_eps},
          {"seed", c.lattice_seed}}},
        {"pair", {{"offset", c.pair_offset}, {"max_degree", c.pair_max_degree}}},
        {"smooth",
         {{"pairs", c.smooth.pairs},
          {"seed", c.smooth.seed},
          {"coarse_radial", c.smooth.coarse_radial},
          {"coarse_angular", c.smooth.coarse_angular},
          {"resolvent_mesh",
           {{"cells_per_unit", c.resolvent_mesh.cells_per_unit},
            {"levels_per_octave", c.resolvent_mesh.levels_per_octave},
            {"gl_nodes", c.resolvent_mesh.gl_nodes},
            {"angular", c.resolvent_mesh.angular}}}}},
        {"cyclicity", {{"max_degree", c.cyclicity_max_degree}, {"levels_per_octave", c.gram_levels_per_octave}}},
    };
    if (with_outputs) j["outputs"] = {{"dir", c.out_dir}};
    return j;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr)) throw NumericError("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(config_to_json(c, false).dump()); }

RadialWeight make_weight(const ExperimentConfig& c) {
    double e = c.construct.epsilon0;
    if (c.weight_family == "unit") return RadialWeight::unit();
    if (c.weight_family == "single_exp") return RadialWeight::single_exp(c.weight_beta, e);
    if (c.weight_family == "double_exp") return RadialWeight::double_exp(c.weight_c, c.weight_beta, e);
    std::ifstream in(c.weight_csv);
    if (!in) throw ConfigError("cannot open weight csv " + c.weight_csv);
    return RadialWeight::from_csv(in, e);
}

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

namespace {

json checks_json(const std::vector<PropertyCheck>& checks) {
    json a = json::array();
    for (auto& ch : checks)
        a.push_back({{"name", ch.name}, {"pass", ch.pass}, {"margin", number(ch.margin)}, {"location", number(ch.location)}});
    return a;
}

std::string status_of(bool pass, bool below) { return pass ? "pass" : below ? "below_regime" : "fail"; }

}  // namespace

json report_json(const std::string& name, const BlockReport& r) {
    json values = json::object();
    for (auto& [k, v] : r.values) values[k] = number(v);
    return {{"name", name},
            {"lemma", r.lemma},
            {"status", status_of(r.all_pass(), r.below_regime)},
            {"below_regime", r.below_regime},
            {"checks", checks_json(r.checks)},
            {"values", values}};
}

json report_json(const std::string& name, const Lemma51Report& r) {
    return {{"name", name},
            {"lemma", "minorant"},
            {"status", status_of(r.all_pass(), false)},
            {"below_regime", false},
            {"checks", checks_json(r.checks)},
            {"values", {{"A", number(r.A)}}}};
}

const std::vector<std::string> kSubcommands{"moments", "regularize", "lattice-verify", "construct",
                                            "pair",    "smooth",     "cyclicity",      "all"};

namespace {

BlockReport simple_report(const std::string& lemma, std::vector<PropertyCheck> checks,
                          std::vector<std::pair<std::string, double>> values) {
    BlockReport r;
    r.lemma = lemma;
    r.checks = std::move(checks);
    r.values = std::move(values);
    return r;
}

PropertyCheck check(const std::string& name, bool pass, double margin, double where = 0) {
    return {name, pass, margin, where};
}

class Pipeline {
public:
    Pipeline(const ExperimentConfig& c, std::filesystem::path out, std::ostream& log)
        : c_(c), out_(std::move(out)), log_(log), hash_(config_hash(c)), weight_(make_weight(c)) {
        std::filesystem::create_directories(out_);
    }

    void run(const std::string& name) {
        if (name == "moments") moments_step();
        else if (name == "regularize") regularize_step();
        else if (name == "lattice-verify") lattice_step();
        else if (name == "construct") construct_step();
        else if (name == "pair") pair_step();
        else if (name == "smooth") smooth_step();
        else if (name == "cyclicity") cyclicity_step();
        else if (name == "all") {
            for (auto& s : kSubcommands)
                if (s != "all") run(s);
        } else
            throw ConfigError("unknown subcommand " + name);
    }

    RunResult result() const { return result_; }

private:
    const ExperimentConfig& c_;
    std::filesystem::path out_;
    std::ostream& log_;
    std::string hash_;
    RadialWeight weight_;
    std::unique_ptr<ConstructionState> state_;
    std::unique_ptr<Generator> generator_;
    RunResult result_;

    const ConstructionState& state() {
        if (!state_) state_ = std::make_unique<ConstructionState>(build_construction(weight_, c_.construct));
        return *state_;
    }
    const Generator& generator() {
        if (!generator_) generator_ = std::make_unique<Generator>(generator_from_state(state()));
        return *generator_;
    }

    void write(const std::string& file, const std::string& text) {
        auto p = out_ / file;
        std::ofstream o(p, std::ios::binary);
        o << text;
        if (!o) throw ConfigError("cannot write " + p.string());
        result_.artifacts.push_back(p);
        log_ << "wrote " << p.string() << "\n";
    }

    void write_json(const std::string& file, const json& j) { write(file, j.dump(1) + "\n"); }

    json envelope(const std::string& sub, const json& reports) {
        bool pass = true;
        for (auto& r : reports) {
            std::string st = r.at("status");
            if (st == "fail") {
                pass = false;
                for (auto& ch : r.at("checks"))
                    if (!ch.at("pass").get<bool>())
                        result_.failures.push_back(r.at("name").get<std::string>() + "/" + ch.at("name").get<std::string>());
            }
        }
        if (!pass) result_.exit_code = 1;
        log_ << sub << ": " << (pass ? "pass" : "FAIL") << "\n";
        return {{"config_hash", hash_},
                {"version", kVersion},
                {"module_versions",
                 {{"numerics", "1"}, {"weights", "1"}, {"convexreg", "1"}, {"blocks", "1"}, {"lattice", "1"},
                  {"construct", "1"}, {"cyclolab", "1"}}},
                {"subcommand", sub},
                {"weight", weight_.family_name()},
                {"status", pass ? "pass" : "fail"},
                {"reports", reports}};
    }

    static std::string fmt(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    void moments_step() {
        auto m = moments(weight_, c_.moments_max_n);
        std::ostringstream csv;
        csv << "n,log_omega,omega\n";
        for (int n = 0; n <= m.max_n(); ++n) csv << n << "," << fmt(m.log_values[n]) << "," << fmt(m.at(n).to_double()) << "\n";
        write("moments.csv", csv.str());
        double worst = kInf;
        for (int n = 1; n < m.max_n(); ++n)
            worst = std::min(worst, m.log_values[n + 1] - 2 * m.log_values[n] + m.log_values[n - 1]);
        if (m.max_n() < 2) worst = 0;
        double tol = -1e-10;
        auto r = simple_report("moments", {check("log_convex", worst >= tol, worst - tol)}, {{"max_n", m.max_n()}});
        write_json("moments.json", envelope("moments", json::array({report_json("moments", r)})));
    }

    void regularize_step() {
        auto& k = c_.construct;
        std::vector<double> x, Q;
        int n = static_cast<int>(std::llround(k.x_max / k.grid_step));
        for (int i = 0; i <= n; ++i) {
            x.push_back(i * k.grid_step);
            Q.push_back(std::sqrt(weight_.Lambda(x.back())));
        }
        auto r = regularize(x, Q, k.epsilon0);
        json patches = json::array();
        for (auto& p : r.patches) patches.push_back({{"c", p.c}, {"d", p.d}, {"e", p.e}, {"a_next", p.a_next}});
        std::vector<json> qs;
        for (double v : r.q.ys()) qs.push_back(number(v));
        write_json("minorant.json", {{"config_hash", hash_},
                                     {"epsilon0", r.epsilon0},
                                     {"x_max", r.x_max},
                                     {"iterations", r.iterations},
                                     {"x", r.q.xs()},
                                     {"q", qs},
                                     {"touch_points", r.touch_points},
                                     {"patches", patches}});
        auto l51 = verify_lemma51(r, x, Q);
        auto g = check_condition_10(weight_, default_x_grid(), k.epsilon0);
        auto gr = simple_report("growth", {check("increasing_tail", g.pass, g.pass ? 1 : -1, g.threshold_x)},
                                {{"threshold_x", g.threshold_x}});
        write_json("regularize.json",
                   envelope("regularize", json::array({report_json("minorant", l51), report_json("growth", gr)})));
    }

    void lattice_step() {
        json reps = json::array();
        auto centers = build_level_depth(c_.lattice_kappa, c_.lattice_x, LevelRule::centers());
        reps.push_back(report_json("tl8_centers", verify_lemma_tl8(centers, c_.lattice_r, c_.lattice_eps)));
        auto pert = build_level_depth(c_.lattice_kappa, c_.lattice_x, LevelRule::perturbed(c_.lattice_seed));
        reps.push_back(report_json("tl8_perturbed", verify_lemma_tl8(pert, c_.lattice_r, c_.lattice_perturbed_eps)));
        reps.push_back(report_json("tl9_full", verify_lemma_tl9(SubsetMask::full(centers), c_.lattice_r, c_.lattice_eps)));

        auto cube = [](cplx z) { return z * z * z; };
        auto one = build_level(0.5, 1 - 0.5 / 8.5, LevelRule::centers());
        std::vector<SubsetMask> m1{SubsetMask::full(one)};
        auto r1 = interpolation_identity(m1, cube, 0.1, 0.97);
        auto l1 = build_level_depth(0.5, 2.5, LevelRule::perturbed(c_.lattice_seed), 1);
        auto l2 = build_level_depth(0.5, 5.0, LevelRule::perturbed(c_.lattice_seed), 2);
        std::vector<SubsetMask> m2{SubsetMask::full(l1), SubsetMask::full(l2)};
        auto r2 = interpolation_identity(m2, cube, cplx(0.3, 0.2), 0.95);
        double e64 = interpolation_identity(m1, cube, 0.1, 0.97, 64).residual;
        double e128 = interpolation_identity(m1, cube, 0.1, 0.97, 128).residual;
        auto ir = simple_report("interpolation",
                                {check("one_level", r1.residual < 1e-8, 1 - r1.residual / 1e-8),
                                 check("two_levels", r2.residual < 1e-8, 1 - r2.residual / 1e-8),
                                 check("doubling", e128 <= e64 / 4, 1 - 4 * e128 / e64)},
                                {{"one_level_residual", r1.residual},
                                 {"two_level_residual", r2.residual},
                                 {"residual_64", e64},
                                 {"residual_128", e128}});
        reps.push_back(report_json("interpolation", ir));
        write_json("lattice.json", envelope("lattice-verify", reps));
    }

    json state_json(const ConstructionState& s) {
        json levels = json::array();
        for (auto& lv : s.levels) {
            json nodes = json::array();
            for (auto& g : lv.gammas)
                nodes.push_back({status_name(g.status), number(g.log_gamma), number(g.residual)});
            levels.push_back({{"n", lv.n},
                              {"x_n", lv.block.x_n},
                              {"lambda", lv.block.lam},
                              {"lambda_prime", lv.block.lam_prime},
                              {"N", lv.lattice.N},
                              {"eta", lv.eta},
                              {"tau", lv.tau},
                              {"x_bound", number(lv.x_bound_eq32)},
                              {"x_floor", lv.x_floor},
                              {"bound_by", lv.bound_by},
                              {"solved", lv.count(GammaStatus::Solved)},
                              {"omitted", lv.count(GammaStatus::Omitted)},
                              {"clamped_high", lv.count(GammaStatus::ClampedHigh)},
                              {"singular", lv.count(GammaStatus::Singular)},
                              {"nodes_status_log_gamma_residual", nodes}});
        }
        return {{"config_hash", hash_},
                {"version", kVersion},
                {"kappa", s.kappa},
                {"epsilon0", s.epsilon0},
                {"touch_points", s.minorant.touch_points.size()},
                {"levels", levels}};
    }

    void construct_step() {
        auto& s = state();
        write_json("state.json", state_json(s));
        json reps = json::array();
        for (int i = 0; i + 1 < static_cast<int>(s.levels.size()); ++i)
            reps.push_back(report_json("increment_" + std::to_string(i + 1), verify_level_increment(s, i)));
        for (int i = 0; i < static_cast<int>(s.levels.size()); ++i)
            reps.push_back(report_json("concentration_" + std::to_string(i + 1), verify_concentration(s, i)));
        auto decay = find_decay_points(s);
        std::vector<PropertyCheck> dc;
        std::vector<std::pair<std::string, double>> dv;
        for (auto& d : decay) {
            double margin = d.found ? (d.threshold - d.log_abs_F).to_double() : -1;
            dc.push_back(check("witness_" + std::to_string(d.n), d.found, margin, d.one_minus_abs));
            dv.push_back({"one_minus_abs_" + std::to_string(d.n), d.one_minus_abs});
        }
        reps.push_back(report_json("decay", simple_report("decay", dc, dv)));
        reps.push_back(report_json("norm_integrals", verify_norm_integrals(s)));
        write_json("construct.json", envelope("construct", reps));
    }

    void pair_step() {
        auto p = build_interleaved_pair(weight_, c_.construct, c_.pair_offset);
        json reps = json::array();
        reps.push_back(report_json("pair", verify_pair(p)));
        auto F1 = generator_from_state(p.first), F2 = generator_from_state(p.second);
        auto G = build_gram(F1, weight_, c_.pair_max_degree, gram_mesh(weight_, c_.gram_levels_per_octave), &F2);
        auto prof = distance_profile(G);
        std::ostringstream csv;
        csv << "N,log_distance\n";
        double lo = kInf;
        for (std::size_t n = 0; n < prof.size(); ++n) {
            double ld = prof[n].log_distance.log_magnitude;
            csv << n << "," << fmt(ld) << "\n";
            lo = std::min(lo, ld);
        }
        write("pair_distance.csv", csv.str());
        double l0 = prof.front().log_distance.log_magnitude, lN = prof.back().log_distance.log_magnitude;
        auto dr = simple_report("subspace_distance",
                                {check("bounded_below", std::isfinite(lo), std::isfinite(lo) ? 1 : -1),
                                 check("plateau", lN - l0 >= std::log(0.5), lN - l0 - std::log(0.5))},
                                {{"log_min_distance", lo},
                                 {"log_distance_0", l0},
                                 {"log_distance_max_degree", lN},
                                 {"log_target_atoms", G.target_atoms.log_magnitude},
                                 {"target_norm_sq_quadrature", G.target_norm_sq}});
        reps.push_back(report_json("subspace_distance", dr));
        write_json("pair.json", envelope("pair", reps));
    }

    void smooth_step() {
        auto& s = state();
        json reps = json::array();
        reps.push_back(report_json("smoothness", verify_smoothness_functional(s, c_.smooth)));
        reps.push_back(report_json("resolvent_integral_F", resolvent_integral_check(generator(), weight_, c_.resolvent_mesh)));
        reps.push_back(report_json("resolvent_integral_control",
                                   resolvent_integral_check(Generator::polynomial({1, 0.5}), weight_, c_.resolvent_mesh)));
        write_json("smooth.json", envelope("smooth", reps));
    }

    void cyclicity_step() {
        auto mesh = gram_mesh(weight_, c_.gram_levels_per_octave);
        int N = c_.cyclicity_max_degree;
        auto pf = distance_profile(build_gram(generator(), weight_, N, mesh));
        auto pc = distance_profile(build_gram(Generator::polynomial({1, 0.5}), weight_, N, mesh));
        std::ostringstream csv;
        csv << "N,d_F,d_control\n";
        double lo = kInf;
        int rises = 0;
        for (int n = 0; n <= N; ++n) {
            csv << n << "," << fmt(pf[n].distance) << "," << fmt(pc[n].distance) << "\n";
            lo = std::min(lo, pf[n].distance);
            if (n > 0 && pf[n].distance_sq > pf[n - 1].distance_sq * (1 + 1e-12)) ++rises;
        }
        write("cyclicity.csv", csv.str());
        auto r = simple_report("cyclicity",
                               {check("plateau_positive", lo > 0, lo),
                                check("nonincreasing", rises == 0, -rises),
                                check("control_decays", pc[N].distance < pc[0].distance / 10,
                                      1 - 10 * pc[N].distance / pc[0].distance)},
                               {{"delta0", lo},
                                {"d_0", pf[0].distance},
                                {"d_max_degree", pf[N].distance},
                                {"control_d_0", pc[0].distance},
                                {"control_d_max_degree", pc[N].distance},
                                {"norm_of_one", std::sqrt(moment(weight_, 0).to_double())}});
        write_json("cyclicity.json", envelope("cyclicity", json::array({report_json("cyclicity", r)})));
    }
};

}  // namespace

RunResult run_subcommand(const std::string& name, const ExperimentConfig& c, const std::filesystem::path& out,
                         std::ostream& log) {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), name) == kSubcommands.end())
        throw ConfigError("unknown subcommand " + name);
    Pipeline p(c, out, log);
    p.run(name);
    return p.result();
}

}  // namespace berglab
