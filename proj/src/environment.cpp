#include "needlesteer/environment.hpp"

#include <cmath>
#include <numbers>

namespace needlesteer {

std::string_view to_string(RegionKind kind) {
    switch (kind) {
        case RegionKind::TR:
            return "TR";
        case RegionKind::CR:
            return "CR";
        case RegionKind::DR:
            return "DR";
    }
    return "?";
}

RegionKind region_kind_from_string(std::string_view text) {
    if (text == "TR") return RegionKind::TR;
    if (text == "CR") return RegionKind::CR;
    if (text == "DR") return RegionKind::DR;
    throw ConfigError("unknown region kind '" + std::string(text) + "'");
}

std::string_view to_string(CrKnowledge mode) { return mode == CrKnowledge::All ? "all" : "none"; }

CrKnowledge cr_knowledge_from_string(std::string_view text) {
    if (text == "all") return CrKnowledge::All;
    if (text == "none") return CrKnowledge::None;
    throw ConfigError("known-crs must be 'all' or 'none', got '" + std::string(text) + "'");
}

bool contains(const RealVec3& center_mm, double radius_mm, const RealVec3& p_mm) {
    const RealVec3 d = p_mm - center_mm;
    return dot(d, d) <= radius_mm * radius_mm;
}

bool contains(const Region& region, const ScaledVec3& p, int scale) {
    return contains(unquantize(region.center, scale), region.radius_mm, unquantize(p, scale));
}

bool Workspace::contains(const RealVec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
}

double Workspace::extent_mm() const {
    double e = 0.0;
    for (int i = 0; i < 3; ++i) {
        e = std::max({e, std::abs(min[i]), std::abs(max[i])});
    }
    return e;
}

void Scenario::validate() const {
    if (scale <= 0) throw ConfigError("scale: must be a positive integer");
    if (!(workspace.min.x < workspace.max.x && workspace.min.y < workspace.max.y && workspace.min.z < workspace.max.z)) {
        throw ConfigError("workspace: min must be strictly below max on every axis");
    }
    // Every stored coordinate must fit the integer grid.
    quantize_scalar(workspace.extent_mm(), scale);
    try {
        needle.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("needle: ") + e.what());
    }
    if (needle.scale != scale) throw ConfigError("needle: scale must match scenario scale");
    if (!frame_is_orthonormal(start)) throw ConfigError("needle.start_tangent/start_normal: frame is not orthonormal");
    if (!workspace.contains(unquantize(start.pos, scale))) throw ConfigError("needle.start_pos: outside workspace");
    if (limits.max_rotations < 0) throw ConfigError("limits.max_rotations: must be >= 0");
    if (!(limits.min_push_mm >= 0.0)) throw ConfigError("limits.min_push_mm: must be >= 0");
    if (!(limits.max_insertion_mm > 0.0)) throw ConfigError("limits.max_insertion_mm: must be > 0");
    if (!(dr_margin_mm > 0.0)) throw ConfigError("dr_margin_mm: must be > 0");
    if (!(clearance_mm >= 0.0)) throw ConfigError("clearance_mm: must be >= 0");

    for (std::size_t i = 0; i < regions.size(); ++i) {
        const Region& r = regions[i];
        const std::string field = "regions[" + std::to_string(i) + "]";
        if (!(r.radius_mm > 0.0)) throw ConfigError(field + ".radius_mm: must be > 0");
        if (r.kind == RegionKind::DR) {
            if (r.parent < 0 || static_cast<std::size_t>(r.parent) >= regions.size() ||
                regions[static_cast<std::size_t>(r.parent)].kind != RegionKind::CR) {
                throw ConfigError(field + ".parent: must reference a CR");
            }
            const Region& cr = regions[static_cast<std::size_t>(r.parent)];
            const double offset = distance(unquantize(r.center, scale), unquantize(cr.center, scale));
            if (!(offset + cr.radius_mm < r.radius_mm)) {
                throw ConfigError(field + ".radius_mm: DR must strictly contain its CR (containment error)");
            }
        } else if (r.parent != -1) {
            throw ConfigError(field + ".parent: only DRs reference a parent");
        }
    }
    bool any_tr = false;
    for (const Region& r : regions) any_tr = any_tr || r.kind == RegionKind::TR;
    if (!any_tr) throw ConfigError("regions: at least one TR is required");
    if (tr_order.empty()) throw ConfigError("tr_order: must list at least the final TR");
    for (std::size_t i = 0; i < tr_order.size(); ++i) {
        const int idx = tr_order[i];
        if (idx < 0 || static_cast<std::size_t>(idx) >= regions.size() ||
            regions[static_cast<std::size_t>(idx)].kind != RegionKind::TR) {
            throw ConfigError("tr_order[" + std::to_string(i) + "]: must reference a TR");
        }
    }
}

void Scenario::attach_detection_regions() {
    const std::size_t n = regions.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (regions[i].kind != RegionKind::CR || detection_region_of(static_cast<int>(i)) != nullptr) continue;
        Region dr = regions[i];
        dr.kind = RegionKind::DR;
        dr.radius_mm = regions[i].radius_mm + dr_margin_mm;
        dr.parent = static_cast<int>(i);
        regions.push_back(dr);
    }
}

std::vector<Region> Scenario::critical_regions() const {
    std::vector<Region> out;
    for (const Region& r : regions) {
        if (r.kind == RegionKind::CR) out.push_back(r);
    }
    return out;
}

const Region* Scenario::detection_region_of(int cr_index) const {
    for (const Region& r : regions) {
        if (r.kind == RegionKind::DR && r.parent == cr_index) return &r;
    }
    return nullptr;
}

KnowledgeBase::KnowledgeBase(const Scenario& scenario, CrKnowledge mode) : KnowledgeBase(known_only(scenario, mode)) {
    actual_ = scenario.regions;
}

KnowledgeBase KnowledgeBase::known_only(const Scenario& scenario, CrKnowledge mode) {
    KnowledgeBase kb;
    for (std::size_t i = 0; i < scenario.regions.size(); ++i) {
        const Region& r = scenario.regions[i];
        if (r.kind != RegionKind::CR) continue;
        if (mode == CrKnowledge::None || !r.known) continue;
        const Region* dr = scenario.detection_region_of(static_cast<int>(i));
        KnownCr k;
        k.center_mm = unquantize(r.center, scenario.scale);
        k.radius_mm = r.radius_mm;
        k.dr_radius_mm = dr ? dr->radius_mm : r.radius_mm + scenario.dr_margin_mm;
        kb.known_.push_back(k);
    }
    return kb;
}

std::size_t KnowledgeBase::learned_count() const {
    std::size_t n = 0;
    for (const KnownCr& k : known_) n += k.learned ? 1 : 0;
    return n;
}

void KnowledgeBase::add_learned(const KnownCr& cr) {
    KnownCr k = cr;
    k.learned = true;
    known_.push_back(k);
}

const std::vector<Region>& KnowledgeBase::actual_regions() const {
    ++actual_reads_;
    return actual_;
}

// ---------------------------------------------------------------------------
// Builtin environments. Workspace [-60,60]^2 x [0,120] mm, start at the origin heading +z,
// a single TR of radius 5 at (0,0,90).

namespace {

Region sphere(RegionKind kind, const RealVec3& c, double r, int scale) {
    Region reg;
    reg.kind = kind;
    reg.center = quantize(c, scale);
    reg.radius_mm = r;
    return reg;
}

constexpr RealVec3 kTargetCenter{0, 0, 90};
constexpr double kTargetRadius = 5.0;

}  // namespace

Scenario base_scenario(std::string name) {
    Scenario s;
    s.name = std::move(name);
    s.scale = kDefaultScale;
    s.needle = NeedleParams{};
    s.needle.scale = s.scale;
    s.start = make_pose({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, s.scale);
    s.regions.push_back(sphere(RegionKind::TR, kTargetCenter, kTargetRadius, s.scale));
    s.tr_order = {0};
    return s;
}

std::vector<std::string> builtin_names() {
    return {"no_cr", "small_mid_cr", "large_mid_cr", "surface_crs", "tunnel_crs"};
}

Scenario builtin_scenario(std::string_view name) {
    Scenario s = base_scenario(std::string(name));
    const int S = s.scale;
    if (name == "no_cr") {
        // TR only
    } else if (name == "small_mid_cr") {
        s.regions.push_back(sphere(RegionKind::CR, {0, 0, 45}, 6.0, S));
    } else if (name == "large_mid_cr") {
        s.regions.push_back(sphere(RegionKind::CR, {0, 0, 45}, 35.0, S));
    } else if (name == "surface_crs") {
        // Six CRs touching the TR in a ring just below its equator; the cap facing the start stays open.
        const double polar = 80.0 * std::numbers::pi / 180.0;
        const double dist = kTargetRadius + 6.0;
        for (int k = 0; k < 6; ++k) {
            const double az = (30.0 + 60.0 * k) * std::numbers::pi / 180.0;
            const RealVec3 dir{std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), -std::cos(polar)};
            s.regions.push_back(sphere(RegionKind::CR, kTargetCenter + dir * dist, 6.0, S));
        }
    } else if (name == "tunnel_crs") {
        // Two rings of four spheres; every sphere keeps 10 mm clearance to the approach axis.
        const double ring = 10.0 + 8.0;
        for (double z : {35.0, 60.0}) {
            for (int k = 0; k < 4; ++k) {
                const double az = (45.0 + 90.0 * k) * std::numbers::pi / 180.0;
                s.regions.push_back(sphere(RegionKind::CR, {ring * std::cos(az), ring * std::sin(az), z}, 8.0, S));
            }
        }
    } else {
        throw ConfigError("unknown builtin scenario '" + std::string(name) + "'");
    }
    s.attach_detection_regions();
    s.validate();
    return s;
}

std::vector<Scenario> builtin_scenarios() {
    std::vector<Scenario> out;
    for (const std::string& n : builtin_names()) out.push_back(builtin_scenario(n));
    return out;
}

}  // namespace needlesteer
