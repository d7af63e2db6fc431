#include "evplan/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "evplan/rng.hpp"
#include "evplan/text.hpp"

namespace evplan::grid {

namespace {

using Kind = FeederError::Kind;

struct Loc {
    std::size_t line = 0;
    std::size_t col = 0;
};

struct Token {
    std::string_view text;
    Loc loc;
};

struct Locations {
    std::vector<Loc> bus_id, bus_slack, line_id, line_from, line_to, load_bus;
    Loc first_bus{1, 1};
};

[[noreturn]] void fail(Kind kind, Loc loc, const std::string& msg) { throw FeederError(kind, loc.line, loc.col, msg); }

bool valid_id(std::string_view id) {
    if (id.empty()) return false;
    return std::none_of(id.begin(), id.end(), [](char c) {
        return std::isspace(static_cast<unsigned char>(c)) || c == '=' || c == '#';
    });
}

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t a) {
        while (parent_[a] != a) a = parent_[a] = parent_[parent_[a]];
        return a;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent_[std::max(a, b)] = std::min(a, b);
        return true;
    }

  private:
    std::vector<std::size_t> parent_;
};

Loc at(const std::vector<Loc>& v, std::size_t i) { return i < v.size() ? v[i] : Loc{}; }

void check_values(const Feeder& f, const Locations& loc) {
    for (std::size_t i = 0; i < f.buses.size(); ++i) {
        const Bus& b = f.buses[i];
        if (!valid_id(b.id)) fail(Kind::Syntax, at(loc.bus_id, i), "invalid bus id '" + b.id + "'");
        if (!std::isfinite(b.x) || !std::isfinite(b.y)) fail(Kind::InvalidValue, at(loc.bus_id, i), "bus '" + b.id + "' has non-finite coordinates");
        if (!(b.base_kv > 0.0) || !std::isfinite(b.base_kv)) {
            fail(Kind::InvalidValue, at(loc.bus_id, i), "bus '" + b.id + "' needs a positive kv");
        }
    }
    for (std::size_t i = 0; i < f.lines.size(); ++i) {
        const Line& l = f.lines[i];
        if (!valid_id(l.id)) fail(Kind::Syntax, at(loc.line_id, i), "invalid line id '" + l.id + "'");
        if (!(l.r_ohm >= 0.0) || !(l.x_ohm >= 0.0) || !std::isfinite(l.r_ohm) || !std::isfinite(l.x_ohm)) {
            fail(Kind::InvalidValue, at(loc.line_id, i), "line '" + l.id + "' needs nonnegative r and x");
        }
        if (!(l.ampacity_a > 0.0) || !std::isfinite(l.ampacity_a)) {
            fail(Kind::InvalidValue, at(loc.line_id, i), "line '" + l.id + "' needs a positive ampacity");
        }
    }
    for (std::size_t i = 0; i < f.loads.size(); ++i) {
        const Load& l = f.loads[i];
        if (!(l.p_kw >= 0.0) || !std::isfinite(l.p_kw) || !std::isfinite(l.q_kvar)) {
            fail(Kind::InvalidValue, at(loc.load_bus, i), "load at '" + l.bus + "' needs kw >= 0 and finite kvar");
        }
    }
}

void check_structure(const Feeder& f, const Locations& loc) {
    std::map<std::string, std::size_t, std::less<>> index;
    std::optional<std::size_t> slack;
    for (std::size_t i = 0; i < f.buses.size(); ++i) {
        const Bus& b = f.buses[i];
        if (!index.emplace(b.id, i).second) fail(Kind::DuplicateBus, at(loc.bus_id, i), "duplicate bus '" + b.id + "'");
        if (b.is_slack) {
            if (slack) fail(Kind::MultipleSlack, at(loc.bus_slack, i), "second slack bus '" + b.id + "'");
            slack = i;
        }
    }
    std::map<std::string, std::size_t, std::less<>> line_ids;
    for (std::size_t i = 0; i < f.lines.size(); ++i) {
        if (!line_ids.emplace(f.lines[i].id, i).second) {
            fail(Kind::DuplicateLine, at(loc.line_id, i), "duplicate line '" + f.lines[i].id + "'");
        }
    }
    if (!slack) fail(Kind::MissingSlack, f.buses.empty() ? Loc{} : loc.first_bus, "feeder has no slack bus");

    for (std::size_t i = 0; i < f.lines.size(); ++i) {
        const Line& l = f.lines[i];
        if (!index.count(l.from)) fail(Kind::UnknownBus, at(loc.line_from, i), "line '" + l.id + "' references unknown bus '" + l.from + "'");
        if (!index.count(l.to)) fail(Kind::UnknownBus, at(loc.line_to, i), "line '" + l.id + "' references unknown bus '" + l.to + "'");
    }
    for (std::size_t i = 0; i < f.loads.size(); ++i) {
        if (!index.count(f.loads[i].bus)) {
            fail(Kind::UnknownBus, at(loc.load_bus, i), "load references unknown bus '" + f.loads[i].bus + "'");
        }
    }

    UnionFind uf(f.buses.size());
    for (std::size_t i = 0; i < f.lines.size(); ++i) {
        const Line& l = f.lines[i];
        if (!uf.unite(index.find(l.from)->second, index.find(l.to)->second)) {
            fail(Kind::Cycle, at(loc.line_id, i), "line '" + l.id + "' closes a cycle");
        }
    }
    const std::size_t root = uf.find(*slack);
    for (std::size_t i = 0; i < f.buses.size(); ++i) {
        if (uf.find(i) != root) {
            fail(Kind::Disconnected, at(loc.bus_id, i), "bus '" + f.buses[i].id + "' is not connected to the slack bus");
        }
    }
}

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        out.push_back({line.substr(start, i - start), {line_no, start + 1}});
    }
    return out;
}

struct KeyValues {
    std::map<std::string, Token> values;
    std::optional<Loc> slack_flag;
};

KeyValues read_pairs(const std::vector<Token>& tokens, std::size_t first, bool allow_slack,
                     std::initializer_list<const char*> allowed) {
    KeyValues kv;
    for (std::size_t t = first; t < tokens.size(); ++t) {
        const Token& tok = tokens[t];
        const auto eq = tok.text.find('=');
        if (eq == std::string_view::npos) {
            if (allow_slack && text::lower(tok.text) == "slack" && !kv.slack_flag) {
                kv.slack_flag = tok.loc;
                continue;
            }
            fail(Kind::Syntax, tok.loc, "expected key=value, got '" + std::string(tok.text) + "'");
        }
        const std::string key = text::lower(tok.text.substr(0, eq));
        const std::string_view value = tok.text.substr(eq + 1);
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
            fail(Kind::Syntax, tok.loc, "unknown key '" + key + "'");
        }
        if (value.empty()) fail(Kind::Syntax, tok.loc, "missing value for '" + key + "'");
        Loc vloc{tok.loc.line, tok.loc.col + eq + 1};
        if (!kv.values.emplace(key, Token{value, vloc}).second) fail(Kind::Syntax, tok.loc, "repeated key '" + key + "'");
    }
    return kv;
}

double number(const KeyValues& kv, const char* key, Loc stmt, std::optional<double> fallback = std::nullopt) {
    const auto it = kv.values.find(key);
    if (it == kv.values.end()) {
        if (fallback) return *fallback;
        fail(Kind::Syntax, stmt, std::string("missing '") + key + "='");
    }
    const auto v = text::parse_double(it->second.text);
    if (!v) fail(Kind::InvalidValue, it->second.loc, "'" + std::string(it->second.text) + "' is not a number");
    return *v;
}

const Token& word(const KeyValues& kv, const char* key, Loc stmt) {
    const auto it = kv.values.find(key);
    if (it == kv.values.end()) fail(Kind::Syntax, stmt, std::string("missing '") + key + "='");
    return it->second;
}

}  // namespace

FeederError::FeederError(Kind kind, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(line == 0 ? message
                                   : "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
      kind_(kind),
      line_(line),
      column_(column),
      detail_(message) {}

const char* to_string(FeederError::Kind k) noexcept {
    switch (k) {
        case Kind::Syntax: return "syntax";
        case Kind::InvalidValue: return "invalid_value";
        case Kind::UnknownBus: return "unknown_bus";
        case Kind::DuplicateBus: return "duplicate_bus";
        case Kind::DuplicateLine: return "duplicate_line";
        case Kind::Cycle: return "cycle";
        case Kind::MissingSlack: return "missing_slack";
        case Kind::MultipleSlack: return "multiple_slack";
        case Kind::Disconnected: return "disconnected";
    }
    return "unknown";
}

std::optional<std::size_t> Feeder::find_bus(std::string_view id) const noexcept {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return std::nullopt;
}

std::size_t Feeder::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].is_slack) return i;
    }
    throw FeederError(FeederError::Kind::MissingSlack, 0, 0, "feeder has no slack bus");
}

double Feeder::bus_load_kw(std::string_view id) const noexcept {
    double s = 0.0;
    for (const auto& l : loads) {
        if (l.bus == id) s += l.p_kw;
    }
    return s;
}

double Feeder::bus_load_kvar(std::string_view id) const noexcept {
    double s = 0.0;
    for (const auto& l : loads) {
        if (l.bus == id) s += l.q_kvar;
    }
    return s;
}

Feeder parse_feeder(std::string_view input) {
    Feeder f;
    Locations loc;
    bool seen_bus = false;
    bool seen_name = false;
    std::size_t line_no = 0;
    while (!input.empty()) {
        ++line_no;
        const auto nl = input.find('\n');
        std::string_view line = input.substr(0, nl);
        input = nl == std::string_view::npos ? std::string_view{} : input.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

        const auto tokens = tokenize(line, line_no);
        if (tokens.empty()) continue;
        const std::string keyword = text::lower(tokens[0].text);
        const Loc stmt = tokens[0].loc;
        if (tokens.size() < 2) fail(Kind::Syntax, stmt, "'" + keyword + "' needs an id");
        const Token& id = tokens[1];
        if (!valid_id(id.text) || id.text.find('=') != std::string_view::npos) {
            fail(Kind::Syntax, id.loc, "invalid id '" + std::string(id.text) + "'");
        }

        if (keyword == "feeder") {
            if (seen_name) fail(Kind::Syntax, stmt, "feeder name given twice");
            if (tokens.size() > 2) fail(Kind::Syntax, tokens[2].loc, "unexpected token after feeder name");
            f.name = std::string(id.text);
            seen_name = true;
        } else if (keyword == "bus") {
            const auto kv = read_pairs(tokens, 2, true, {"x", "y", "kv"});
            Bus b;
            b.id = std::string(id.text);
            b.x = number(kv, "x", stmt);
            b.y = number(kv, "y", stmt);
            b.base_kv = number(kv, "kv", stmt);
            if (!(b.base_kv > 0.0)) fail(Kind::InvalidValue, kv.values.at("kv").loc, "kv must be positive");
            b.is_slack = kv.slack_flag.has_value();
            if (!seen_bus) loc.first_bus = stmt;
            seen_bus = true;
            f.buses.push_back(std::move(b));
            loc.bus_id.push_back(id.loc);
            loc.bus_slack.push_back(kv.slack_flag.value_or(id.loc));
        } else if (keyword == "line") {
            const auto kv = read_pairs(tokens, 2, false, {"from", "to", "r", "x", "amps"});
            Line l;
            l.id = std::string(id.text);
            const Token& from = word(kv, "from", stmt);
            const Token& to = word(kv, "to", stmt);
            l.from = std::string(from.text);
            l.to = std::string(to.text);
            l.r_ohm = number(kv, "r", stmt);
            l.x_ohm = number(kv, "x", stmt);
            l.ampacity_a = number(kv, "amps", stmt, kDefaultAmpacityA);
            if (l.r_ohm < 0.0) fail(Kind::InvalidValue, kv.values.at("r").loc, "r must be nonnegative");
            if (l.x_ohm < 0.0) fail(Kind::InvalidValue, kv.values.at("x").loc, "x must be nonnegative");
            if (!(l.ampacity_a > 0.0)) fail(Kind::InvalidValue, kv.values.at("amps").loc, "amps must be positive");
            f.lines.push_back(std::move(l));
            loc.line_id.push_back(id.loc);
            loc.line_from.push_back(from.loc);
            loc.line_to.push_back(to.loc);
        } else if (keyword == "load") {
            const auto kv = read_pairs(tokens, 2, false, {"kw", "kvar"});
            Load l;
            l.bus = std::string(id.text);
            l.p_kw = number(kv, "kw", stmt);
            l.q_kvar = number(kv, "kvar", stmt, 0.0);
            if (l.p_kw < 0.0) fail(Kind::InvalidValue, kv.values.at("kw").loc, "kw must be nonnegative");
            f.loads.push_back(std::move(l));
            loc.load_bus.push_back(id.loc);
        } else {
            fail(Kind::Syntax, stmt, "unknown statement '" + std::string(tokens[0].text) + "'");
        }
    }
    if (!seen_bus) fail(Kind::MissingSlack, Loc{std::max<std::size_t>(line_no, 1), 1}, "feeder has no buses");
    check_structure(f, loc);
    return f;
}

std::string emit_feeder(const Feeder& f) {
    using text::format_double;
    std::ostringstream out;
    if (!f.name.empty()) out << "feeder " << f.name << '\n';
    for (const Bus& b : f.buses) {
        out << "bus " << b.id << " x=" << format_double(b.x) << " y=" << format_double(b.y)
            << " kv=" << format_double(b.base_kv) << (b.is_slack ? " slack" : "") << '\n';
    }
    for (const Line& l : f.lines) {
        out << "line " << l.id << " from=" << l.from << " to=" << l.to << " r=" << format_double(l.r_ohm)
            << " x=" << format_double(l.x_ohm) << " amps=" << format_double(l.ampacity_a) << '\n';
    }
    for (const Load& l : f.loads) {
        out << "load " << l.bus << " kw=" << format_double(l.p_kw) << " kvar=" << format_double(l.q_kvar) << '\n';
    }
    return out.str();
}

void validate_feeder(const Feeder& feeder) {
    if (feeder.buses.empty()) throw FeederError(Kind::MissingSlack, 0, 0, "feeder has no buses");
    const Locations none;
    check_values(feeder, none);
    check_structure(feeder, none);
}

geo::GeoPoint AffineMap::to_geo(double x, double y) const noexcept {
    const double tx = (x - x_min) / (x_max - x_min);
    const double ty = (y - y_min) / (y_max - y_min);
    return {std::lerp(bbox.south, bbox.north, ty), std::lerp(bbox.west, bbox.east, tx)};
}

void AffineMap::to_local(const geo::GeoPoint& p, double& x, double& y) const noexcept {
    const double tx = (p.lon - bbox.west) / (bbox.east - bbox.west);
    const double ty = (p.lat - bbox.south) / (bbox.north - bbox.south);
    x = std::lerp(x_min, x_max, tx);
    y = std::lerp(y_min, y_max, ty);
}

AffineMap fit_affine(const Feeder& feeder, const geo::BoundingBox& anchor) {
    geo::validate(anchor);
    if (feeder.buses.empty()) throw GridError("cannot georegister a feeder without buses");
    AffineMap m;
    m.bbox = anchor;
    m.x_min = m.x_max = feeder.buses.front().x;
    m.y_min = m.y_max = feeder.buses.front().y;
    for (const Bus& b : feeder.buses) {
        m.x_min = std::min(m.x_min, b.x);
        m.x_max = std::max(m.x_max, b.x);
        m.y_min = std::min(m.y_min, b.y);
        m.y_max = std::max(m.y_max, b.y);
    }
    if (!(m.x_max > m.x_min)) throw GridError("degenerate local extent: all bus x coordinates are equal");
    if (!(m.y_max > m.y_min)) throw GridError("degenerate local extent: all bus y coordinates are equal");
    return m;
}

Feeder georegister(const Feeder& feeder, const geo::BoundingBox& anchor) {
    const AffineMap m = fit_affine(feeder, anchor);
    Feeder out = feeder;
    for (Bus& b : out.buses) b.location = m.to_geo(b.x, b.y);
    return out;
}

NearestBus nearest_bus(const geo::GeoPoint& station, const Feeder& feeder, const std::vector<std::size_t>& candidates) {
    if (candidates.empty()) throw GridError("no feasible bus: the candidate pool is empty");
    std::optional<NearestBus> best;
    for (const std::size_t c : candidates) {
        if (c >= feeder.buses.size()) throw GridError("candidate bus index out of range");
        const double d = geo::haversine_km(station, feeder.buses[c].location);
        if (!best || d < best->distance_km ||
            (d == best->distance_km && feeder.buses[c].id < feeder.buses[best->bus].id)) {
            best = NearestBus{c, d};
        }
    }
    return *best;
}

GridMatrices grid_matrices(const Feeder& feeder, const std::vector<geo::GeoPoint>& stations,
                           const std::vector<double>& vmin_pu, double threshold) {
    if (vmin_pu.size() != feeder.buses.size()) throw GridError("one minimum voltage per bus is required");
    GridMatrices g;
    for (std::size_t p = 0; p < feeder.buses.size(); ++p) {
        if (vmin_pu[p] > threshold) g.pool.push_back(p);
    }
    if (g.pool.empty()) {
        throw GridError("no bus has a minimum voltage above " + text::format_double(threshold) +
                        " pu; relax the screening threshold");
    }
    g.bus_distance = coverage::Matrix(g.pool.size(), stations.size());
    g.voltage_priority = coverage::Matrix(g.pool.size(), stations.size());
    for (std::size_t j = 0; j < stations.size(); ++j) {
        for (std::size_t p = 0; p < g.pool.size(); ++p) {
            g.bus_distance(p, j) = geo::haversine_km(feeder.buses[g.pool[p]].location, stations[j]);
        }
        const NearestBus nb = nearest_bus(stations[j], feeder, g.pool);
        const auto row = static_cast<std::size_t>(std::find(g.pool.begin(), g.pool.end(), nb.bus) - g.pool.begin());
        g.voltage_priority(row, j) = 1.0 - vmin_pu[nb.bus];
        g.assignment.push_back(nb);
    }
    return g;
}

Feeder synthetic_feeder(const SyntheticFeederParams& p) {
    if (p.n_buses < 2) throw GridError("a synthetic feeder needs at least two buses");
    if (p.branching < 1) throw GridError("branching factor must be at least one");
    if (!(p.kv > 0.0) || !(p.span_km > 0.0) || p.r_ohm_per_km < 0.0 || p.x_ohm_per_km < 0.0) {
        throw GridError("synthetic feeder needs positive kv and span, nonnegative impedances");
    }
    if (p.load_kw_min < 0.0 || p.load_kw_max < p.load_kw_min) throw GridError("invalid load range");
    if (!(p.power_factor > 0.0 && p.power_factor <= 1.0)) throw GridError("power factor must be in (0, 1]");

    Rng rng(p.seed);
    Feeder f;
    f.name = "synthetic";
    std::vector<std::size_t> children(p.n_buses, 0);
    std::vector<double> heading(p.n_buses, 0.0);
    f.buses.push_back({"b0", 0.0, 0.0, p.kv, true, {}});
    const double q_ratio = std::tan(std::acos(p.power_factor));
    for (std::size_t i = 1; i < p.n_buses; ++i) {
        std::vector<std::size_t> open;
        for (std::size_t b = 0; b < i; ++b) {
            if (children[b] < p.branching) open.push_back(b);
        }
        const std::size_t parent = open[rng.below(open.size())];
        ++children[parent];
        heading[i] = heading[parent] + rng.uniform(-0.7, 0.7);
        const double len = p.span_km * rng.uniform(0.6, 1.4);
        const Bus& pb = f.buses[parent];
        Bus b{"b" + std::to_string(i), pb.x + len * std::cos(heading[i]), pb.y + len * std::sin(heading[i]), p.kv,
              false, {}};
        f.lines.push_back({"l" + std::to_string(i), pb.id, b.id, p.r_ohm_per_km * len, p.x_ohm_per_km * len, p.ampacity_a});
        const double kw = rng.uniform(p.load_kw_min, p.load_kw_max);
        f.loads.push_back({b.id, kw, kw * q_ratio});
        f.buses.push_back(std::move(b));
    }
    return f;
}

}  // namespace evplan::grid
