#include "eqlab/cli.hpp"

#include "eqlab/csv.hpp"
#include "eqlab/fixtures.hpp"
#include "eqlab/flow.hpp"
#include "eqlab/focusing.hpp"
#include "eqlab/sumproduct.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

#ifndef EQLAB_VERSION
#define EQLAB_VERSION "unknown"
#endif

namespace eqlab {

namespace {

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if(b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while(std::getline(ss, part, sep))
        out.push_back(trim(part));
    return out;
}

template <class T> std::optional<T> parse_number(const std::string& s)
{
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if(ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::vector<double> parse_reals(const std::string& key, const std::string& s, char sep)
{
    std::vector<double> out;
    for(const auto& part : split(s, sep)) {
        if(part.empty())
            continue;
        auto v = parse_number<double>(part);
        if(!v)
            throw ConfigError("key '" + key + "': '" + part + "' is not a number");
        out.push_back(*v);
    }
    return out;
}

} // namespace

Config Config::parse(std::istream& is)
{
    Config cfg;
    std::string line;
    int lineno = 0;
    while(std::getline(is, line)) {
        ++lineno;
        auto t = trim(line);
        if(t.empty() || t[0] == '#')
            continue;
        auto eq = t.find('=');
        if(eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        auto key = trim(t.substr(0, eq));
        if(key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if(cfg.has(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.set(key, trim(t.substr(eq + 1)));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if(!in)
        throw IoError("cannot read config file '" + path.string() + "'");
    return parse(in);
}

std::string Config::str(const std::string& key) const
{
    auto it = values_.find(key);
    if(it == values_.end())
        throw ConfigError("missing required key '" + key + "'");
    resolved_[key] = it->second;
    return it->second;
}

std::string Config::str(const std::string& key, const std::string& fallback) const
{
    auto it = values_.find(key);
    const std::string& v = it == values_.end() ? fallback : it->second;
    resolved_[key] = v;
    return v;
}

long long Config::integer(const std::string& key) const
{
    auto s = str(key);
    auto v = parse_number<long long>(s);
    if(!v)
        throw ConfigError("key '" + key + "': '" + s + "' is not an integer");
    return *v;
}

long long Config::integer(const std::string& key, long long fallback) const
{
    return has(key) ? integer(key) : std::stoll(str(key, std::to_string(fallback)));
}

double Config::real(const std::string& key) const
{
    auto s = str(key);
    auto v = parse_number<double>(s);
    if(!v || !std::isfinite(*v))
        throw ConfigError("key '" + key + "': '" + s + "' is not a finite number");
    return *v;
}

double Config::real(const std::string& key, double fallback) const
{
    if(has(key))
        return real(key);
    str(key, csv_double(fallback));
    return fallback;
}

bool Config::flag(const std::string& key, bool fallback) const
{
    auto s = str(key, fallback ? "true" : "false");
    if(s == "true" || s == "1")
        return true;
    if(s == "false" || s == "0")
        return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

std::vector<std::string> Config::unused() const
{
    std::vector<std::string> out;
    for(const auto& [k, v] : values_)
        if(!resolved_.count(k))
            out.push_back(k);
    return out;
}

namespace {

int int_or(const Config& cfg, const std::string& key, long long fallback, long long lo = 1)
{
    long long v = cfg.integer(key, fallback);
    if(v < lo || v > 2000000000)
        throw ConfigError("key '" + key + "': " + std::to_string(v) + " is out of range (>= " + std::to_string(lo) +
                          ")");
    return int(v);
}

int required_int(const Config& cfg, const std::string& key, int lo = 1)
{
    long long v = cfg.integer(key);
    if(v < lo || v > 2000000000)
        throw ConfigError("key '" + key + "': " + std::to_string(v) + " is out of range (>= " + std::to_string(lo) +
                          ")");
    return int(v);
}


class Outputs {
  public:
    explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {}

    template <class Fn> void write(const std::string& name, Fn&& fn)
    {
        std::ofstream os(dir_ / name, std::ios::binary);
        if(!os)
            throw IoError("cannot write '" + (dir_ / name).string() + "'");
        fn(os);
        os.flush();
        if(!os)
            throw IoError("write failed for '" + (dir_ / name).string() + "'");
        files_.push_back(name);
    }

    void summary(const std::vector<std::pair<std::string, std::string>>& rows)
    {
        write("summary.csv", [&](std::ostream& os) {
            os << "key,value\r\n";
            for(const auto& [k, v] : rows)
                os << csv_field(k) << "," << csv_field(v) << "\r\n";
        });
    }

    std::vector<std::string> files() const { return files_; }

  private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

std::string yes(bool b) { return b ? "true" : "false"; }


Field field_of(const Config& cfg)
{
    auto kind = cfg.str("field.kind");
    if(kind == "real")
        return Field::real();
    if(kind == "padic")
        return Field::padic(required_int(cfg, "field.p", 2), required_int(cfg, "field.K", 1));
    throw ConfigError("key 'field.kind': expected real or padic, got '" + kind + "'");
}

RepSpace rep_of(const Config& cfg, const Field& f)
{
    return RepSpace{f, int_or(cfg, "rep.d", 2, 0), int_or(cfg, "rep.m", 1)};
}

struct FixtureSpec {
    std::string kind;
    std::size_t n = 0;
    int noise_k = -1;
    std::vector<int> dir_k;
    std::vector<FVector> dir_u;
    int k = 0;
    double theta = 0.0;
    int count = 0;
    std::string path, path_a, path_b;
    std::optional<double> weight;
};

bool is_vec_kind(const std::string& kind)
{
    return kind == "vec_uniform" || kind == "vec_box" || kind == "padic_line" || kind == "geometric" ||
           kind == "vec_file";
}

FixtureSpec fixture_spec(const Config& cfg, int m)
{
    FixtureSpec s;
    s.kind = cfg.str("fixture.kind");
    const bool sampled = s.kind == "uniform" || s.kind == "planted" || s.kind == "vec_uniform" || s.kind == "vec_box";
    if(sampled)
        s.n = std::size_t(int_or(cfg, "fixture.n", 10000));
    if(s.kind == "planted" || s.kind == "vec_box") {
        s.noise_k = int(cfg.integer("fixture.noise_k", -1));
        for(const auto& part : split(cfg.str("fixture.dir_k"), ',')) {
            auto v = parse_number<int>(part);
            if(!v || *v < 0)
                throw ConfigError("key 'fixture.dir_k': '" + part + "' is not a ladder index");
            s.dir_k.push_back(*v);
        }
        if(s.dir_k.empty() || int(s.dir_k.size()) > m)
            throw ConfigError("key 'fixture.dir_k': need between 1 and m = " + std::to_string(m) + " directions");
    }
    if(s.kind == "planted" || s.kind == "vec_box" || s.kind == "padic_line") {
        if(cfg.has("fixture.dir_u"))
            for(const auto& part : split(cfg.str("fixture.dir_u"), ';')) {
                auto u = parse_reals("fixture.dir_u", part, ' ');
                if(int(u.size()) != m)
                    throw ConfigError("key 'fixture.dir_u': each direction needs m = " + std::to_string(m) +
                                      " coordinates");
                s.dir_u.push_back(FVector{u});
            }
        if(s.kind != "padic_line" && !s.dir_u.empty() && s.dir_u.size() != s.dir_k.size())
            throw ConfigError("key 'fixture.dir_u': one vector per entry of fixture.dir_k");
    }
    if(s.kind == "lowest_row" || s.kind == "padic_line")
        s.k = required_int(cfg, "fixture.k", 0);
    if(s.kind == "geometric") {
        s.theta = cfg.real("fixture.theta");
        s.count = required_int(cfg, "fixture.count");
        if(!(s.theta > 0.0))
            throw ConfigError("key 'fixture.theta': must be positive");
    }
    if(s.kind == "file")
        s.path = cfg.str("fixture.path");
    if(s.kind == "vec_file") {
        s.path_a = cfg.str("fixture.path_a");
        s.path_b = cfg.str("fixture.path_b");
    }
    if(cfg.has("fixture.weight")) {
        s.weight = cfg.real("fixture.weight");
        if(!(*s.weight > 0.0))
            throw ConfigError("key 'fixture.weight': must be positive");
    }
    static const std::vector<std::string> kinds{"uniform",     "planted", "lowest_row", "file",     "vec_uniform",
                                                "vec_box",     "padic_line", "geometric", "vec_file"};
    if(std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end())
        throw ConfigError("key 'fixture.kind': unknown fixture kind '" + s.kind + "'");
    return s;
}

// Real: Gaussian vectors made orthonormal.  Padic: unit lower-triangular
// vectors, independent modulo p.
std::vector<FVector> default_directions(const Field& f, int m, std::size_t count, Rng& rng)
{
    std::vector<FVector> out;
    if(f.is_real()) {
        std::normal_distribution<double> N(0.0, 1.0);
        while(out.size() < count) {
            FVector v{std::vector<double>(m)};
            for(auto& x : v.coords)
                x = N(rng);
            for(const auto& w : out) {
                double dot = 0.0;
                for(int i = 0; i < m; ++i)
                    dot += v[i] * w[i];
                for(int i = 0; i < m; ++i)
                    v[i] -= dot * w[i];
            }
            double n = norm(f, v);
            if(n < 1e-6)
                continue;
            for(auto& x : v.coords)
                x /= n;
            out.push_back(v);
        }
        return out;
    }
    std::uniform_int_distribution<std::int64_t> R(0, f.modulus() - 1);
    for(std::size_t j = 0; j < count; ++j) {
        FVector v{std::vector<double>(m, 0.0)};
        v[j] = 1.0;
        for(int i = int(j) + 1; i < m; ++i)
            v[i] = double(R(rng));
        out.push_back(v);
    }
    return out;
}

RepBox fixture_box(const FixtureSpec& s, const RepSpace& rep, Rng& rng)
{
    auto units = s.dir_u.empty() ? default_directions(rep.field, rep.m, s.dir_k.size(), rng) : s.dir_u;
    RepBox box{zero_point(rep), {}};
    for(std::size_t j = 0; j < s.dir_k.size(); ++j)
        box.dirs.push_back(make_direction(rep.field, units[j], s.dir_k[j]));
    return box;
}

double noise_of(const FixtureSpec& s, const Field& f) { return s.noise_k < 0 ? 0.0 : f.scale(s.noise_k); }

PhiCloud load_cloud(const std::string& path, const RepSpace& rep, std::vector<double>* weights)
{
    std::ifstream in(path, std::ios::binary);
    if(!in)
        throw IoError("cannot read fixture '" + path + "'");
    try {
        return read_cloud_csv(in, rep, weights);
    } catch(const std::invalid_argument& e) {
        throw ConfigError("fixture '" + path + "': " + e.what());
    } catch(const std::out_of_range& e) {
        throw ConfigError("fixture '" + path + "': " + e.what());
    } catch(const std::runtime_error& e) {
        throw ConfigError("fixture '" + path + "': " + e.what());
    }
}

struct PhiFixture {
    WeightedMeasure mu;
    std::optional<RepBox> box;
    bool weighted = false;
};

PhiFixture phi_fixture(const FixtureSpec& s, const RepSpace& rep, Rng& rng)
{
    if(is_vec_kind(s.kind))
        throw ConfigError("key 'fixture.kind': '" + s.kind + "' is a pair fixture, not a cloud in Phi");
    PhiFixture out;
    out.weighted = s.weight.has_value();
    if(s.kind == "uniform") {
        out.mu.cloud = uniform_phi_cloud(rep, s.n, rng);
    } else if(s.kind == "planted") {
        out.box = fixture_box(s, rep, rng);
        double w = s.weight.value_or(1.0 / double(s.n));
        out.mu = planted_focus_measure(rep, *out.box, s.n, noise_of(s, rep.field), w, rng);
    } else if(s.kind == "lowest_row") {
        if(!rep.field.is_real())
            throw ConfigError("key 'fixture.kind': lowest_row needs field.kind=real");
        out.mu.cloud = lowest_row_grid(rep, s.k);
    } else {
        std::vector<double> w;
        out.mu.cloud = load_cloud(s.path, rep, &w);
        if(!w.empty()) {
            out.mu.weights = std::move(w);
            out.weighted = true;
        }
    }
    if(out.mu.weights.empty()) {
        double w = s.weight.value_or(out.mu.cloud.size() ? 1.0 / double(out.mu.cloud.size()) : 0.0);
        out.mu.weights.assign(out.mu.cloud.size(), w);
    }
    return out;
}

struct VecPair {
    VecCloud a, b;
};

VecCloud as_vec(const PhiCloud& c) { return VecCloud{c.rep.field, c.rep.m, c.data}; }

VecPair vec_fixture(const FixtureSpec& s, const Field& f, int m, Rng& rng)
{
    if(!is_vec_kind(s.kind))
        throw ConfigError("key 'fixture.kind': '" + s.kind + "' is not a pair fixture");
    if(s.kind == "vec_uniform") {
        auto a = uniform_vec_cloud(f, m, s.n, rng);
        return {a, uniform_vec_cloud(f, m, s.n, rng)};
    }
    if(s.kind == "vec_box") {
        RepSpace flat{f, 0, m};
        auto box = fixture_box(s, flat, rng);
        auto base = [&] {
            FVector v = sample_unit_ball(rng, f, m);
            if(f.is_real())
                for(auto& x : v.coords)
                    x *= 0.3;
            return v;
        };
        FVector b1 = base(), b2 = base();
        auto a = box_vec_cloud(f, b1, box.dirs, s.n, noise_of(s, f), rng);
        return {a, box_vec_cloud(f, b2, box.dirs, s.n, noise_of(s, f), rng)};
    }
    if(s.kind == "padic_line") {
        if(!f.is_padic())
            throw ConfigError("key 'fixture.kind': padic_line needs field.kind=padic");
        if(s.k > f.precision())
            throw ConfigError("key 'fixture.k': exceeds field.K");
        FVector u = s.dir_u.empty() ? default_directions(f, m, 1, rng)[0] : s.dir_u[0];
        FVector b1 = sample_unit_ball(rng, f, m), b2 = sample_unit_ball(rng, f, m);
        auto a = padic_line_cloud(f, b1, u, s.k, rng);
        return {a, padic_line_cloud(f, b2, u, s.k, rng)};
    }
    if(s.kind == "geometric") {
        if(!f.is_real() || m != 2)
            throw ConfigError("key 'fixture.kind': geometric needs field.kind=real and rep.m=2");
        auto g = geometric_product_cloud(s.theta, s.count);
        return {g, g};
    }
    RepSpace flat{f, 0, m};
    return {as_vec(load_cloud(s.path_a, flat, nullptr)), as_vec(load_cloud(s.path_b, flat, nullptr))};
}

void check_unused(const Config& cfg)
{
    auto extra = cfg.unused();
    if(extra.empty())
        return;
    std::string msg = "unknown key";
    msg += extra.size() > 1 ? "s" : "";
    for(std::size_t i = 0; i < extra.size(); ++i)
        msg += (i ? ", '" : " '") + extra[i] + "'";
    throw ConfigError(msg + " for this experiment");
}

std::string format_vec(const Field& f, std::span<const double> v)
{
    std::string s = "(";
    for(std::size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + format_scalar(f, v[i]);
    return s + ")";
}


struct Common {
    std::uint64_t seed = 1;
    int threads = 1;
};

Common common_of(const Config& cfg)
{
    Common c;
    long long seed = cfg.integer("seed", 1);
    if(seed < 0)
        throw ConfigError("key 'seed': must be >= 0");
    c.seed = std::uint64_t(seed);
    c.threads = int_or(cfg, "threads", 1);
    cfg.str("out", "out");
    return c;
}

void run_fixtures(const Config& cfg, const Common& c, Outputs& out)
{
    Field f = field_of(cfg);
    RepSpace rep = rep_of(cfg, f);
    auto spec = fixture_spec(cfg, rep.m);
    check_unused(cfg);
    Rng rng(c.seed);
    if(is_vec_kind(spec.kind)) {
        auto pair = vec_fixture(spec, f, rep.m, rng);
        out.write("fixture_a.csv", [&](std::ostream& os) { write_cloud_csv(os, as_phi_cloud(pair.a)); });
        out.write("fixture_b.csv", [&](std::ostream& os) { write_cloud_csv(os, as_phi_cloud(pair.b)); });
        out.summary({{"points_a", std::to_string(pair.a.size())}, {"points_b", std::to_string(pair.b.size())}});
        return;
    }
    auto fx = phi_fixture(spec, rep, rng);
    out.write("fixture.csv", [&](std::ostream& os) {
        write_cloud_csv(os, fx.mu.cloud, fx.weighted ? &fx.mu.weights : nullptr);
    });
    std::vector<std::pair<std::string, std::string>> rows{{"points", std::to_string(fx.mu.size())}};
    if(fx.box)
        out.write("box.txt", [&](std::ostream& os) { os << format_box(rep, *fx.box); });
    out.summary(rows);
}

void run_proj(const Config& cfg, const Common& c, Outputs& out)
{
    Field f = field_of(cfg);
    RepSpace rep = rep_of(cfg, f);
    auto spec = fixture_spec(cfg, rep.m);
    ProjConfig pc;
    pc.alpha = cfg.real("proj.alpha", pc.alpha);
    pc.eps = cfg.real("proj.eps", pc.eps);
    pc.C = cfg.real("proj.C", pc.C);
    pc.c = cfg.real("proj.c", pc.c);
    pc.k = int_or(cfg, "proj.k", pc.k, 0);
    pc.r_samples = int_or(cfg, "proj.r_samples", pc.r_samples);
    pc.anchor_budget = int_or(cfg, "proj.anchor_budget", pc.anchor_budget);
    pc.threads = c.threads;
    bool box_search = cfg.flag("proj.box_search", true);
    bool trivial = cfg.flag("proj.trivial_audit", false);
    check_unused(cfg);
    make_scale(f, pc.k);

    Rng rng(c.seed);
    auto theta = phi_fixture(spec, rep, rng).mu.cloud;
    auto prof = projection_profile(theta, pc, rng);
    out.write("profile.csv", [&](std::ostream& os) { write_profile_csv(os, f, prof); });
    std::vector<std::pair<std::string, std::string>> rows{
        {"points", std::to_string(theta.size())},
        {"cloud_covering", std::to_string(prof.cloud_covering)},
        {"hypothesis_ok", yes(prof.hypothesis_ok)},
        {"threshold", csv_double(prof.threshold)},
        {"good_fraction", csv_double(prof.good_fraction)},
        {"exceptional_fraction", csv_double(prof.exceptional_fraction)},
        {"exceptional_ci_lo", csv_double(prof.exceptional_ci.lo)},
        {"exceptional_ci_hi", csv_double(prof.exceptional_ci.hi)},
    };
    if(trivial) {
        auto t = trivial_estimate_audit(theta, pc, rng);
        out.write("trivial.csv", [&](std::ostream& os) {
            os << "r_repr,zero_count,plus_count\r\n";
            for(std::size_t i = 0; i < t.r.size(); ++i)
                os << format_scalar(f, t.r[i]) << "," << t.zero_counts[i] << "," << t.plus_counts[i] << "\r\n";
        });
        rows.push_back({"trivial_alpha_used", csv_double(t.alpha_used)});
        rows.push_back({"trivial_zero_failure", csv_double(t.zero_failure)});
        rows.push_back({"trivial_plus_failure", csv_double(t.plus_failure)});
    }
    if(box_search) {
        auto found = find_representation_box(theta, pc);
        rows.push_back({"box_found", yes(found.box.has_value())});
        rows.push_back({"box_candidates", std::to_string(found.candidates_tried)});
        out.write("box.txt", [&](std::ostream& os) {
            if(found.box)
                os << format_box(rep, *found.box);
            else
                os << "NotFound: " << found.reason << "\n";
        });
    }
    out.summary(rows);
}

void run_sumprod(const Config& cfg, const Common& c, Outputs& out)
{
    Field f = field_of(cfg);
    const int m = int_or(cfg, "rep.m", 1);
    auto spec = fixture_spec(cfg, m);
    SumProdConfig sc;
    sc.alpha_hat = cfg.real("sumprod.alpha_hat", sc.alpha_hat);
    sc.eps1 = cfg.real("sumprod.eps1", sc.eps1);
    sc.eps2 = cfg.real("sumprod.eps2", sc.eps2);
    sc.C = cfg.real("sumprod.C", sc.C);
    sc.c = cfg.real("sumprod.c", sc.c);
    sc.k = int_or(cfg, "sumprod.k", sc.k, 0);
    sc.r_samples = int_or(cfg, "sumprod.r_samples", sc.r_samples);
    sc.pair_budget = std::size_t(int_or(cfg, "sumprod.pair_budget", 100000000));
    sc.strict = cfg.flag("sumprod.strict", sc.strict);
    sc.threads = c.threads;
    bool box_search = cfg.flag("sumprod.box_search", true);
    check_unused(cfg);
    make_scale(f, sc.k);

    Rng rng(c.seed);
    auto pair = vec_fixture(spec, f, m, rng);
    auto e = exceptional_measure(pair.a, pair.b, sc, rng);
    out.write("exceptional.csv", [&](std::ostream& os) { write_exc_csv(os, f, e); });
    std::vector<std::pair<std::string, std::string>> rows{
        {"points_a", std::to_string(pair.a.size())},
        {"points_b", std::to_string(pair.b.size())},
        {"hypothesis_ok", yes(e.hypothesis_ok)},
        {"threshold", csv_double(e.threshold)},
        {"exceptional_fraction", csv_double(e.fraction)},
        {"exceptional_ci_lo", csv_double(e.ci.lo)},
        {"exceptional_ci_hi", csv_double(e.ci.hi)},
        {"measure_threshold", csv_double(e.measure_threshold)},
        {"large", yes(e.large)},
        {"all_exact", yes(e.all_exact)},
    };
    if(box_search) {
        auto found = find_common_box(pair.a, pair.b, sc);
        rows.push_back({"box_found", yes(found.box.has_value())});
        out.write("box.txt", [&](std::ostream& os) {
            if(!found.box) {
                os << "NotFound: " << found.reason << "\n";
                return;
            }
            const auto& b = *found.box;
            os << "BASE1 " << format_vec(f, b.base1.coords) << "\n";
            os << "BASE2 " << format_vec(f, b.base2.coords) << "\n";
            for(std::size_t j = 0; j < b.dirs.size(); ++j)
                os << "DIR " << j << " radius=q^-" << b.dirs[j].k << " u=" << format_vec(f, b.dirs[j].u.coords)
                   << "\n";
        });
    }
    out.summary(rows);
}

void run_focus(const Config& cfg, const Common& c, Outputs& out)
{
    Field f = field_of(cfg);
    RepSpace rep = rep_of(cfg, f);
    auto spec = fixture_spec(cfg, rep.m);
    FocusParams p;
    p.alpha = cfg.real("focus.alpha", p.alpha);
    p.eps = cfg.real("focus.eps", p.eps);
    p.A = cfg.real("focus.A", p.A);
    p.k1 = int_or(cfg, "focus.k1", p.k1, 0);
    p.k2 = int_or(cfg, "focus.k2", p.k2, 0);
    p.nhd = cfg.real("focus.nhd", p.nhd);
    p.kappa = cfg.real("focus.kappa", p.kappa);
    p.C = cfg.real("focus.C", p.C);
    p.c = cfg.real("focus.c", p.c);
    p.anchor_budget = int_or(cfg, "focus.anchor_budget", p.anchor_budget);
    p.threads = c.threads;
    bool decompose = cfg.flag("focus.decompose", true);
    int interp_r = int_or(cfg, "focus.interp_r_samples", 0, 0);
    int interp_l = 0, interp_b = 0;
    double interp_tol = 0.0;
    if(interp_r > 0) {
        interp_l = int_or(cfg, "focus.interp_l", 2);
        interp_b = int_or(cfg, "focus.interp_b", p.k1, 0);
        interp_tol = cfg.real("focus.interp_tol", 0.2);
    }
    bool mult3 = cfg.flag("focus.mult3", false);
    check_unused(cfg);
    validate_params(f, p);
    if(decompose && (p.k2 - p.k1) % 2 != 0)
        throw ConfigError("keys 'focus.k1', 'focus.k2': the decomposition needs k2 - k1 even");
    if(mult3 && spec.kind != "planted")
        throw ConfigError("key 'focus.mult3': needs fixture.kind=planted");

    Rng rng(c.seed);
    auto fx = phi_fixture(spec, rep, rng);
    const auto& mu = fx.mu;
    validate_measure(mu);

    auto scan = scan_focused(mu, p);
    std::vector<const FocusWitness*> by_net(scan.net.size(), nullptr);
    for(const auto& w : scan.focused)
        by_net[w.net_index] = &w;
    out.write("scan.csv", [&](std::ostream& os) {
        os << "net_index,point,focused,box_dirs,cover_exponent,mass_ratio,mass_required\r\n";
        for(std::size_t i = 0; i < scan.net.size(); ++i) {
            os << i << "," << scan.net[i] << ",";
            if(const auto* w = by_net[i])
                os << "true," << w->box.dirs.size() << "," << csv_double(w->check.cover_exponent) << ","
                   << csv_double(w->check.mass_ratio) << "," << csv_double(w->check.mass_required) << "\r\n";
            else
                os << "false,,,,\r\n";
        }
    });
    std::vector<std::pair<std::string, std::string>> rows{
        {"points", std::to_string(mu.size())},
        {"total_mass", csv_double(mu.total())},
        {"net_size", std::to_string(scan.net.size())},
        {"focused_net_points", std::to_string(scan.focused.size())},
    };
    if(decompose) {
        auto d = ip_fs_decompose(mu, ScaleIndex{p.k1}, (p.k2 - p.k1) / 2, p);
        auto part = [&](const char* name, const WeightedMeasure& m) {
            out.write(name, [&](std::ostream& os) { write_cloud_csv(os, m.cloud, &m.weights); });
        };
        part("ip.csv", d.ip);
        part("fs.csv", d.fs);
        part("negligible.csv", d.negligible);
        rows.push_back({"ip_mass", csv_double(d.ip.total())});
        rows.push_back({"fs_mass", csv_double(d.fs.total())});
        rows.push_back({"negligible_mass", csv_double(d.negligible.total())});
        rows.push_back({"negligible_budget", csv_double(d.budget)});
        rows.push_back({"budget_exceeded", yes(d.budget_exceeded)});
    }
    if(interp_r > 0) {
        auto a = interpolation_audit(mu, interp_l, interp_r, ScaleIndex{interp_b}, rng, interp_tol, c.threads);
        out.write("interpolation.csv", [&](std::ostream& os) {
            os << "r_repr,alpha1,alpha2,pushed,margin,ok\r\n";
            for(const auto& r : a.rows)
                os << format_scalar(f, r.r) << "," << csv_double(r.alpha1) << "," << csv_double(r.alpha2) << ","
                   << csv_double(r.pushed) << "," << csv_double(r.margin) << "," << yes(r.ok) << "\r\n";
        });
        rows.push_back({"interp_ok_fraction", csv_double(a.ok_fraction)});
    }
    if(mult3) {
        // anchored at the first support point; the fixture directions cut
        // down to the delta_1 ball around it
        PhiPoint y = mu.cloud.get(0);
        RepBox rel{zero_point(rep), fx.box->dirs};
        for(auto& dir : rel.dirs)
            if(dir.k < p.k1)
                dir = make_direction(rep.field, dir.u, p.k1);
        try {
            auto m3 = multiple_of_three_audit(mu, y, rel, p);
            rows.push_back({"mult3_status", "ok"});
            rows.push_back({"mult3_alpha_est", csv_double(m3.alpha_est)});
            rows.push_back({"mult3_nearest", std::to_string(m3.nearest)});
            rows.push_back({"mult3_gap", csv_double(m3.gap)});
            rows.push_back({"mult3_expected", std::to_string(m3.expected)});
            rows.push_back({"mult3_profile_ok", yes(m3.profile_ok)});
        } catch(const PreconditionFailed& e) {
            rows.push_back({"mult3_status", std::string("precondition_failed: ") + e.what()});
        }
    }
    out.summary(rows);
}

Mat2 parse_mat(const Config& cfg, const std::string& key)
{
    auto v = parse_reals(key, cfg.str(key), ' ');
    if(v.size() != 4)
        throw ConfigError("key '" + key + "': expected four numbers 'a b c d'");
    return Mat2{v[0], v[1], v[2], v[3]};
}

void run_flow(const Config& cfg, const Common& c, Outputs& out)
{
    auto x0_kind = cfg.str("flow.x0", "identity");
    std::array<Mat2, 3> g;
    if(x0_kind == "custom")
        for(int j = 0; j < 3; ++j)
            g[j] = parse_mat(cfg, "flow.g" + std::to_string(j + 1));
    else if(x0_kind != "identity" && x0_kind != "generic")
        throw ConfigError("key 'flow.x0': expected identity, generic or custom, got '" + x0_kind + "'");
    const int T = required_int(cfg, "flow.T", 0);
    const int R = int_or(cfg, "flow.R", 10, 0);
    DichotomyConfig dc;
    dc.nR = int_or(cfg, "flow.nR", dc.nR);
    dc.nHaar = int_or(cfg, "flow.nHaar", dc.nHaar);
    dc.a_const = cfg.real("flow.a_const", dc.a_const);
    dc.k_const = cfg.real("flow.k_const", dc.k_const);
    dc.qhat = cfg.real("flow.qhat", dc.qhat);
    dc.tau_window = int_or(cfg, "flow.tau_window", dc.tau_window, 0);
    dc.proximity_grid = int_or(cfg, "flow.proximity_grid", dc.proximity_grid);
    dc.search_height = int_or(cfg, "flow.search_height", dc.search_height);
    dc.threads = c.threads;
    auto suite_kind = cfg.str("flow.suite", "standard");
    if(suite_kind != "standard" && suite_kind != "constant")
        throw ConfigError("key 'flow.suite': expected standard or constant, got '" + suite_kind + "'");
    if(!(dc.qhat > 1.0))
        throw ConfigError("key 'flow.qhat': must exceed 1");
    check_unused(cfg);

    GPoint x0 = x0_kind == "identity" ? identity_point() : x0_kind == "generic" ? generic_point() : make_gpoint(g);
    std::vector<TestFunction> suite;
    if(suite_kind == "standard")
        suite = standard_suite();
    suite.push_back(constant_one());

    Rng rng(c.seed);
    auto rep = dichotomy_report(x0, T, R, suite, dc, rng);
    out.write("arc.csv", [&](std::ostream& os) { write_arc_csv(os, rep); });
    out.write("proximity.csv", [&](std::ostream& os) { write_proximity_csv(os, rep); });
    out.write("discrepancy.csv", [&](std::ostream& os) {
        os << "phi_id,arc_mean,arc_stderr,haar_mean,haar_stderr,discrepancy,threshold,part1\r\n";
        for(std::size_t i = 0; i < rep.disc.size(); ++i) {
            const auto& d = rep.disc[i];
            os << csv_field(rep.phi_ids[i]) << "," << csv_double(d.arc.value) << "," << csv_double(d.arc.stderr_)
               << "," << csv_double(d.haar.value) << "," << csv_double(d.haar.stderr_) << ","
               << csv_double(d.value) << "," << csv_double(rep.part1_threshold) << "," << yes(rep.part1[i])
               << "\r\n";
        }
    });
    bool all_part1 = std::all_of(rep.part1.begin(), rep.part1.end(), [](bool b) { return b; });
    out.summary({
        {"T", std::to_string(T)},
        {"R", std::to_string(R)},
        {"part1_threshold", csv_double(rep.part1_threshold)},
        {"part1_all", yes(all_part1)},
        {"min_proximity", csv_double(rep.min_proximity)},
        {"part2_threshold", csv_double(rep.part2_threshold)},
        {"part2", yes(rep.part2)},
        {"haar_deficit", csv_double(rep.haar_deficit)},
    });
}

} // namespace

std::vector<std::string> run_experiment(const Config& cfg, const std::filesystem::path& out)
{
    auto kind = cfg.str("experiment");
    Common c = common_of(cfg);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if(ec)
        throw IoError("cannot create output directory '" + out.string() + "': " + ec.message());
    Outputs o(out);
    if(kind == "fixtures")
        run_fixtures(cfg, c, o);
    else if(kind == "proj")
        run_proj(cfg, c, o);
    else if(kind == "sumprod")
        run_sumprod(cfg, c, o);
    else if(kind == "focus")
        run_focus(cfg, c, o);
    else if(kind == "flow")
        run_flow(cfg, c, o);
    else
        throw ConfigError("key 'experiment': unknown experiment '" + kind + "'");
    return o.files();
}

void write_manifest(const Config& cfg, const std::filesystem::path& out, const std::vector<std::string>& files)
{
    std::ofstream os(out / "manifest.txt", std::ios::binary);
    if(!os)
        throw IoError("cannot write '" + (out / "manifest.txt").string() + "'");
    os << "eqlab " << EQLAB_VERSION << "\n";
    os << "[config]\n";
    for(const auto& [k, v] : cfg.resolved())
        os << k << "=" << v << "\n";
    os << "[outputs]\n";
    for(const auto& f : files)
        os << f << "\n";
    os.flush();
    if(!os)
        throw IoError("write failed for manifest.txt");
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"eqlab: batch experiments for local-field projections, focusing and unipotent flows"};
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config_path, "flat key=value configuration file")->required();
    app.add_option("--seed", seed, "RNG seed (overrides the config)");
    app.add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.set_version_flag("--version", std::string("eqlab ") + EQLAB_VERSION);
    try {
        app.parse(argc, argv);
    } catch(const CLI::Success& e) {
        out << (dynamic_cast<const CLI::CallForHelp*>(&e) ? app.help() : std::string(e.what()) + "\n");
        return ExitOk;
    } catch(const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return ExitConfig;
    }

    try {
        Config cfg = Config::load(config_path);
        if(seed)
            cfg.set("seed", std::to_string(*seed));
        if(threads)
            cfg.set("threads", std::to_string(*threads));
        if(!out_dir.empty())
            cfg.set("out", out_dir);
        std::filesystem::path dir = cfg.str("out", "out");
        auto files = run_experiment(cfg, dir);
        write_manifest(cfg, dir, files);
        out << "wrote " << files.size() << " files to " << dir.string() << "\n";
        return ExitOk;
    } catch(const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return ExitConfig;
    } catch(const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return ExitIo;
    } catch(const std::filesystem::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return ExitIo;
    } catch(const IterationCap& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitNumerical;
    } catch(const PrecisionExceeded& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitNumerical;
    } catch(const DependentInput& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitNumerical;
    } catch(const BudgetExceeded& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitNumerical;
    } catch(const ZeroMass& e) {
        err << "numerical error: " << e.what() << "\n";
        return ExitNumerical;
    } catch(const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return ExitConfig;
    } catch(const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return ExitUnexpected;
    }
}

} // namespace eqlab
