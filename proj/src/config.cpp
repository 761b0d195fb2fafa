#include "furst/config.hpp"

#include "furst/errors.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace furst {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// ---------------------------------------------------------------- Section

namespace {
const json& empty_object() {
    static const json e = json::object();
    return e;
}
[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ValidationError(path + ": " + what); }
}  // namespace

Section::Section(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
}

bool Section::has(const std::string& key) const { return node_->contains(key); }

std::string Section::child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

const json& Section::at(const std::string& key) const {
    if (!has(key)) fail(child_path(key), "missing required key");
    return (*node_)[key];
}

Section Section::section(const std::string& key) const {
    return has(key) ? Section(at(key), child_path(key)) : Section(empty_object(), child_path(key));
}

double Section::number(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) fail(child_path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(child_path(key), "must be finite");
    return x;
}
double Section::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

long Section::integer(const std::string& key) const {
    const json& v = at(key);
    if (v.is_number_integer()) return v.get<long>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::floor(x) == x && std::abs(x) < 9e15) return static_cast<long>(x);
    }
    fail(child_path(key), "expected an integer");
}
long Section::integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

std::uint64_t Section::u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
    fail(child_path(key), "expected a non-negative 64-bit integer");
}

bool Section::boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) fail(child_path(key), "expected true or false");
    return v.get<bool>();
}

std::string Section::string(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(child_path(key), "expected a string");
    return v.get<std::string>();
}
std::string Section::string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
}

std::vector<double> Section::numbers(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(child_path(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(child_path(key) + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
        if (!std::isfinite(out.back())) fail(child_path(key) + "[" + std::to_string(i) + "]", "must be finite");
    }
    return out;
}

std::vector<long> Section::integers(const std::string& key) const {
    const json& v = at(key);
    if (v.is_number()) return {integer(key)};
    if (!v.is_array()) fail(child_path(key), "expected an integer or an array of integers");
    std::vector<long> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) fail(child_path(key) + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back(v[i].get<long>());
    }
    return out;
}
std::vector<long> Section::integers(const std::string& key, std::vector<long> fallback) const {
    return has(key) ? integers(key) : fallback;
}

std::vector<std::string> Section::strings(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(child_path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) fail(child_path(key) + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

// ---------------------------------------------------------------- ensembles

namespace {

Matrix parse_atom_matrix(const Section& atom) {
    if (atom.has("rotation")) return Matrix::rotation2(atom.number("rotation"));
    if (atom.has("diagonal")) {
        const auto d = atom.numbers("diagonal");
        if (d.size() < 2 || d.size() > static_cast<std::size_t>(kMaxDim))
            fail(atom.child_path("diagonal"), "dimension must lie in [2, 8]");
        const Matrix m = Matrix::diagonal(d);
        require_special_linear(m, atom.child_path("diagonal"));
        return m;
    }
    const auto entries = atom.numbers("matrix");
    const auto d       = static_cast<int>(std::lround(std::sqrt(static_cast<double>(entries.size()))));
    if (d < 2 || d > kMaxDim || static_cast<std::size_t>(d * d) != entries.size())
        fail(atom.child_path("matrix"), "expected d*d row-major entries with 2 <= d <= 8, got " +
                                            std::to_string(entries.size()));
    const Matrix m = Matrix::from_rows(d, entries);
    require_special_linear(m, atom.child_path("matrix"));
    return m;
}

class EnsembleResolver {
public:
    explicit EnsembleResolver(const json& defs) : defs_(defs) {}

    const MatrixEnsemble& get(const std::string& name, const std::string& referencePath) {
        if (auto it = done_.find(name); it != done_.end()) return it->second;
        if (!defs_.contains(name)) fail(referencePath, "unknown ensemble '" + name + "'");
        if (!active_.insert(name).second) fail(referencePath, "cyclic composite ensemble '" + name + "'");
        MatrixEnsemble mu = build(Section(defs_[name], "ensembles." + name));
        active_.erase(name);
        return done_.emplace(name, std::move(mu)).first->second;
    }

    std::map<std::string, MatrixEnsemble> all() {
        for (auto it = defs_.begin(); it != defs_.end(); ++it) get(it.key(), "ensembles." + it.key());
        return done_;
    }

private:
    MatrixEnsemble build(const Section& s) {
        const std::string type = s.string("type");
        try {
            if (type == "finite") {
                const json& atoms = s.node().contains("atoms") ? s.node()["atoms"] : json();
                if (!atoms.is_array() || atoms.empty()) fail(s.child_path("atoms"), "expected a non-empty array");
                std::vector<WeightedMatrix> wm;
                for (std::size_t i = 0; i < atoms.size(); ++i) {
                    const Section a(atoms[i], s.child_path("atoms") + "[" + std::to_string(i) + "]");
                    const double  w = a.number("weight");
                    if (!(w > 0.0)) fail(a.child_path("weight"), "must be positive");
                    wm.push_back({w, parse_atom_matrix(a)});
                    if (wm.back().matrix.dim() != wm.front().matrix.dim())
                        fail(a.path(), "dimension differs from the first atom");
                }
                return MatrixEnsemble::finite(std::move(wm));
            }
            if (type == "rotation_uniform") return MatrixEnsemble::rotation_uniform();
            if (type == "hyperbolic_rotation_mix")
                return MatrixEnsemble::hyperbolic_rotation_mix(s.number("expansion", 2.0), s.number("probability", 0.5));
            if (type == "appendix_alpha") return MatrixEnsemble::appendix_alpha();
            if (type == "appendix_beta") return MatrixEnsemble::appendix_beta();
            if (type == "composite") {
                const json& parts = s.node().contains("parts") ? s.node()["parts"] : json();
                if (!parts.is_array() || parts.empty()) fail(s.child_path("parts"), "expected a non-empty array");
                std::vector<std::pair<double, MatrixEnsemble>> ps;
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    const Section p(parts[i], s.child_path("parts") + "[" + std::to_string(i) + "]");
                    ps.emplace_back(p.number("weight"), get(p.string("ensemble"), p.child_path("ensemble")));
                }
                return MatrixEnsemble::composite(std::move(ps));
            }
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& e) {
            fail(s.path(), e.what());
        }
        fail(s.child_path("type"), "unknown ensemble type '" + type + "'");
    }

    const json&                           defs_;
    std::map<std::string, MatrixEnsemble> done_;
    std::set<std::string>                 active_;
};

Schedule parse_schedule(const Section& s, EnsembleResolver& ensembles) {
    const std::string           rule = s.string("rule", "stationary");
    std::vector<MatrixEnsemble> table;
    std::vector<std::string>    names;
    auto                        index = [&](const std::string& name, const std::string& path) {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        table.push_back(ensembles.get(name, path));
        names.push_back(name);
        return names.size() - 1;
    };
    const long length = s.integer("length", Schedule::kUnbounded);
    if (length < 1) fail(s.child_path("length"), "must be >= 1");
    try {
        if (rule == "stationary") {
            index(s.string("ensemble"), s.child_path("ensemble"));
            return Schedule(std::move(table), Stationary{0}, length);
        }
        if (rule == "periodic" || rule == "explicit") {
            const std::string key  = rule == "periodic" ? "pattern" : "sequence";
            const auto        list = s.strings(key);
            if (list.empty()) fail(s.child_path(key), "must not be empty");
            std::vector<std::size_t> seq;
            for (std::size_t i = 0; i < list.size(); ++i)
                seq.push_back(index(list[i], s.child_path(key) + "[" + std::to_string(i) + "]"));
            if (rule == "periodic") return Schedule(std::move(table), Periodic{seq}, length);
            return Schedule(std::move(table), Explicit{seq}, length);
        }
        if (rule == "appendix_levels") {
            const std::size_t a = index(s.string("alpha"), s.child_path("alpha"));
            const std::size_t b = index(s.string("beta"), s.child_path("beta"));
            return Schedule(std::move(table), AppendixLevels{s.integers("levels"), a, b}, length);
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const Error& e) {
        fail(s.path(), e.what());
    }
    fail(s.child_path("rule"), "unknown schedule rule '" + rule + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    cfg.source = source;
    cfg.hash   = fnv1a(text);
    try {
        cfg.root = json::parse(text);
    } catch (const json::parse_error& e) {
        // Translate the byte offset into line:column.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
        throw ValidationError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
    }
    const Section root(cfg.root, "");
    cfg.experiment = root.string("experiment", "");
    if (root.has("seed")) cfg.seed = root.u64("seed", 0);
    if (root.has("workers")) {
        const long w = root.integer("workers");
        if (w < 0 || w > 1024) fail("workers", "must lie in [0, 1024]");
        cfg.workers = static_cast<int>(w);
    }
    if (root.has("budget")) {
        cfg.budget = root.number("budget");
        if (!(*cfg.budget > 0.0)) fail("budget", "must be positive");
    }
    if (root.has("out")) cfg.out = root.string("out");

    const json&      defs = root.has("ensembles") ? cfg.root["ensembles"] : empty_object();
    if (!defs.is_object()) fail("ensembles", "expected an object");
    EnsembleResolver resolver(defs);
    cfg.ensembles = resolver.all();
    if (root.has("schedule")) cfg.schedule = parse_schedule(root.section("schedule"), resolver);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path + ": cannot open configuration file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace furst
