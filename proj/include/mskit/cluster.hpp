#pragma once

// Cluster geometry. Lengths are Bohr throughout; files may carry Angstrom.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mskit/angmom.hpp"

namespace mskit {

inline constexpr double kBohrPerAngstrom = 1.8897261246257702;
inline constexpr double kMinSeparation = 1e-6;

struct Site {
    Vec3 position{};
    int species = 0;
    bool is_empty_cell = false;
};

/// Per-species partition data. rb is the bounding-sphere radius.
struct Species {
    int id = 0;
    int lpt = 0;
    double rb = 1.0;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

inline double distance(const Vec3& a, const Vec3& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}

inline double norm(const Vec3& a) { return std::hypot(a[0], a[1], a[2]); }

/// Immutable list of scattering sites plus the species table.
class Cluster {
public:
    Cluster() = default;

    Cluster(std::vector<Site> sites, std::vector<Species> species)
        : sites_(std::move(sites)), species_(std::move(species)) {
        validate();
    }

    const std::vector<Site>& sites() const noexcept { return sites_; }
    const std::vector<Species>& species_table() const noexcept { return species_; }
    int size() const noexcept { return static_cast<int>(sites_.size()); }
    const Site& site(int i) const { return sites_.at(static_cast<std::size_t>(i)); }

    const Species& species(int id) const {
        for (const auto& s : species_)
            if (s.id == id) return s;
        throw std::out_of_range("Cluster: unknown species id " + std::to_string(id));
    }

    const Species& species_of(int site_index) const { return species(site(site_index).species); }
    int lpt(int site_index) const { return species_of(site_index).lpt; }

    double min_separation() const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sites_.size(); ++i)
            for (std::size_t j = i + 1; j < sites_.size(); ++j) d = std::min(d, distance(sites_[i].position, sites_[j].position));
        return d;
    }

    Vec3 centroid() const {
        Vec3 c{0, 0, 0};
        for (const auto& s : sites_)
            for (int k = 0; k < 3; ++k) c[static_cast<std::size_t>(k)] += s.position[static_cast<std::size_t>(k)];
        for (auto& v : c) v /= std::max<std::size_t>(sites_.size(), 1);
        return c;
    }

    /// Replace every species' lpt (used when a run overrides the file values).
    Cluster with_lpt(const std::map<int, int>& lpt_by_species) const {
        auto sp = species_;
        for (auto& s : sp) {
            auto it = lpt_by_species.find(s.id);
            if (it != lpt_by_species.end()) s.lpt = it->second;
        }
        return Cluster(sites_, std::move(sp));
    }

    Cluster with_species(std::vector<Species> sp) const { return Cluster(sites_, std::move(sp)); }

    /// Checks the species table against the basis cutoff.
    void check_lpt(int l_max) const {
        for (const auto& s : species_)
            if (s.lpt < 0 || s.lpt > l_max)
                throw std::invalid_argument("species " + std::to_string(s.id) + ": lpt=" + std::to_string(s.lpt) +
                                            " outside [0, l_max=" + std::to_string(l_max) + "]");
    }

private:
    void validate() const {
        if (sites_.empty()) throw std::invalid_argument("Cluster: no sites");
        for (const auto& s : species_) {
            if (s.lpt < 0) throw std::invalid_argument("Cluster: negative lpt for species " + std::to_string(s.id));
            if (!(s.rb > 0)) throw std::invalid_argument("Cluster: rb must be positive for species " + std::to_string(s.id));
        }
        for (const auto& s : sites_) (void)species(s.species);
        for (std::size_t i = 0; i < sites_.size(); ++i)
            for (std::size_t j = i + 1; j < sites_.size(); ++j)
                if (distance(sites_[i].position, sites_[j].position) <= kMinSeparation)
                    throw std::invalid_argument("Cluster: sites " + std::to_string(i) + " and " + std::to_string(j) +
                                                " coincide");
    }

    std::vector<Site> sites_;
    std::vector<Species> species_;
};

namespace detail {

// Origin first, then by distance; ties broken lexicographically so the
// ordering is reproducible.
inline void sort_by_distance(std::vector<Site>& sites) {
    std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
        const double da = norm(a.position), db = norm(b.position);
        if (std::abs(da - db) > 1e-9) return da < db;
        return a.position < b.position;
    });
}

inline std::vector<Species> default_species(bool with_empty) {
    std::vector<Species> sp{{0, 0, 1.0}};
    if (with_empty) sp.push_back({1, 0, 1.0});
    return sp;
}

}  // namespace detail

/// All fcc lattice points within `radius` of the origin (origin included).
inline Cluster build_fcc(double lattice_a, double radius) {
    if (!(lattice_a > 0)) throw std::invalid_argument("build_fcc: lattice constant must be positive");
    if (radius < 0) throw std::invalid_argument("build_fcc: negative cluster radius");
    const double half = 0.5 * lattice_a;
    const int n = static_cast<int>(std::ceil(radius / half)) + 1;
    std::vector<Site> sites;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j)
            for (int k = -n; k <= n; ++k) {
                if (((i + j + k) % 2 + 2) % 2 != 0) continue;
                const Vec3 p{i * half, j * half, k * half};
                if (norm(p) <= radius * (1.0 + 1e-12)) sites.push_back({p, 0, false});
            }
    detail::sort_by_distance(sites);
    return Cluster(std::move(sites), detail::default_species(false));
}

/// Diamond lattice (fcc + (1/4,1/4,1/4) a basis) within `radius`, origin included.
inline Cluster build_diamond(double lattice_a, double radius) {
    if (!(lattice_a > 0)) throw std::invalid_argument("build_diamond: lattice constant must be positive");
    if (radius < 0) throw std::invalid_argument("build_diamond: negative cluster radius");
    const double half = 0.5 * lattice_a, quarter = 0.25 * lattice_a;
    const int n = static_cast<int>(std::ceil(radius / half)) + 2;
    std::vector<Site> sites;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j)
            for (int k = -n; k <= n; ++k) {
                if (((i + j + k) % 2 + 2) % 2 != 0) continue;
                for (int b = 0; b < 2; ++b) {
                    const Vec3 p{i * half + b * quarter, j * half + b * quarter, k * half + b * quarter};
                    if (norm(p) <= radius * (1.0 + 1e-12)) sites.push_back({p, 0, false});
                }
            }
    detail::sort_by_distance(sites);
    return Cluster(std::move(sites), detail::default_species(false));
}

/// Flat honeycomb sheet in the xy-plane centred on an atom. With
/// `with_empty_cells`, every hexagon centre inside the radius carries an
/// empty cell (species 1).
inline Cluster build_honeycomb(double bond, double radius, bool with_empty_cells) {
    if (!(bond > 0)) throw std::invalid_argument("build_honeycomb: bond length must be positive");
    if (radius < 0) throw std::invalid_argument("build_honeycomb: negative cluster radius");
    const double s3 = std::sqrt(3.0);
    const Vec3 a1{s3 * bond, 0, 0}, a2{0.5 * s3 * bond, 1.5 * bond, 0};
    // Within one cell: atom A at origin, atom B at +bond*y, hexagon centre at -bond*y.
    const std::array<std::pair<Vec3, bool>, 3> basis{{{{0, 0, 0}, false}, {{0, bond, 0}, false}, {{0, -bond, 0}, true}}};
    const int n = static_cast<int>(std::ceil(radius / bond)) + 2;
    std::vector<Site> sites;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j)
            for (const auto& [off, empty] : basis) {
                if (empty && !with_empty_cells) continue;
                const Vec3 p{i * a1[0] + j * a2[0] + off[0], i * a1[1] + j * a2[1] + off[1], 0.0};
                if (norm(p) <= radius * (1.0 + 1e-12)) sites.push_back({p, empty ? 1 : 0, empty});
            }
    detail::sort_by_distance(sites);
    // keep an atom at index 0
    return Cluster(std::move(sites), detail::default_species(with_empty_cells));
}

/// Explicit site list, one species.
inline Cluster build_shells(const std::vector<Vec3>& positions) {
    std::vector<Site> sites;
    sites.reserve(positions.size());
    for (const auto& p : positions) sites.push_back({p, 0, false});
    return Cluster(std::move(sites), detail::default_species(false));
}

/// Centre site plus its 12 fcc nearest neighbours.
inline Cluster build_fcc_first_shell(double lattice_a) {
    const double h = 0.5 * lattice_a;
    std::vector<Vec3> p{{0, 0, 0}};
    for (int s1 : {-1, 1})
        for (int s2 : {-1, 1}) {
            p.push_back({s1 * h, s2 * h, 0});
            p.push_back({s1 * h, 0, s2 * h});
            p.push_back({0, s1 * h, s2 * h});
        }
    return build_shells(p);
}

// ---------------------------------------------------------------------------
// Cluster file:
//   nsites <N> unit <bohr|angstrom>
//   x y z species_id is_empty          (N lines)
//   species <id> lpt <int> rb <float>  (one per species)
// '#' starts a comment.

enum class LengthUnit { bohr, angstrom };

inline double to_bohr(double v, LengthUnit u) { return u == LengthUnit::angstrom ? v * kBohrPerAngstrom : v; }
inline double from_bohr(double v, LengthUnit u) { return u == LengthUnit::angstrom ? v / kBohrPerAngstrom : v; }

inline LengthUnit parse_length_unit(const std::string& s) {
    if (s == "bohr") return LengthUnit::bohr;
    if (s == "angstrom") return LengthUnit::angstrom;
    throw std::invalid_argument("unknown length unit '" + s + "' (expected bohr|angstrom)");
}

inline Cluster read_cluster(std::istream& in) {
    std::string raw;
    int lineno = 0, declared = -1;
    LengthUnit unit = LengthUnit::bohr;
    std::vector<Site> sites;
    std::vector<Species> species;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto c = raw.find('#'); c != std::string::npos) raw.erase(c);
        std::istringstream ls(raw);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;

        auto number = [&](const std::string& t) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(t, &pos);
                if (pos != t.size()) throw std::invalid_argument(t);
                return v;
            } catch (const std::exception&) {
                throw ParseError(lineno, "not a number: '" + t + "'");
            }
        };
        auto integer = [&](const std::string& t) {
            const double v = number(t);
            if (v != std::floor(v)) throw ParseError(lineno, "not an integer: '" + t + "'");
            return static_cast<int>(v);
        };

        if (tok[0] == "nsites") {
            if (declared >= 0) throw ParseError(lineno, "duplicate header");
            if (tok.size() != 4 || tok[2] != "unit") throw ParseError(lineno, "expected 'nsites <N> unit <bohr|angstrom>'");
            declared = integer(tok[1]);
            if (declared < 0) throw ParseError(lineno, "negative site count");
            try {
                unit = parse_length_unit(tok[3]);
            } catch (const std::invalid_argument& e) {
                throw ParseError(lineno, e.what());
            }
        } else if (tok[0] == "species") {
            if (tok.size() != 6 || tok[2] != "lpt" || tok[4] != "rb")
                throw ParseError(lineno, "expected 'species <id> lpt <int> rb <float>'");
            species.push_back({integer(tok[1]), integer(tok[3]), to_bohr(number(tok[5]), unit)});
        } else {
            if (declared < 0) throw ParseError(lineno, "site line before 'nsites' header");
            if (tok.size() != 5) throw ParseError(lineno, "expected 5 fields 'x y z species_id is_empty', got " + std::to_string(tok.size()));
            const int empty = integer(tok[4]);
            if (empty != 0 && empty != 1) throw ParseError(lineno, "is_empty must be 0 or 1");
            sites.push_back({{to_bohr(number(tok[0]), unit), to_bohr(number(tok[1]), unit), to_bohr(number(tok[2]), unit)},
                             integer(tok[3]),
                             empty == 1});
        }
    }
    if (sites.empty()) throw ParseError(lineno, "no sites");
    if (static_cast<int>(sites.size()) != declared)
        throw ParseError(lineno, "header declares " + std::to_string(declared) + " sites, found " + std::to_string(sites.size()));
    for (const auto& s : sites) {
        const bool known = std::any_of(species.begin(), species.end(), [&](const Species& sp) { return sp.id == s.species; });
        if (!known) throw ParseError(lineno, "no species block for species id " + std::to_string(s.species));
    }
    return Cluster(std::move(sites), std::move(species));
}

inline void write_cluster(std::ostream& out, const Cluster& c, LengthUnit unit = LengthUnit::bohr) {
    out << "nsites " << c.size() << " unit " << (unit == LengthUnit::bohr ? "bohr" : "angstrom") << '\n';
    out << std::setprecision(17);
    for (const auto& s : c.sites())
        out << from_bohr(s.position[0], unit) << ' ' << from_bohr(s.position[1], unit) << ' '
            << from_bohr(s.position[2], unit) << ' ' << s.species << ' ' << (s.is_empty_cell ? 1 : 0) << '\n';
    for (const auto& sp : c.species_table())
        out << "species " << sp.id << " lpt " << sp.lpt << " rb " << from_bohr(sp.rb, unit) << '\n';
}

inline Cluster load_cluster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cluster file '" + path + "'");
    return read_cluster(in);
}

inline void save_cluster(const Cluster& c, const std::string& path, LengthUnit unit = LengthUnit::bohr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cluster file '" + path + "'");
    write_cluster(out, c, unit);
}

}  // namespace mskit
