#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "needlesteer/geometry.hpp"
#include "needlesteer/kinematics.hpp"

namespace needlesteer {

enum class RegionKind { TR, CR, DR };

std::string_view to_string(RegionKind kind);
RegionKind region_kind_from_string(std::string_view text);

struct Region {
    RegionKind kind = RegionKind::CR;
    ScaledVec3 center;
    double radius_mm = 1.0;
    bool known = true;  // a-priori knowledge flag (ignored for TRs, which are always known)
    int parent = -1;    // DR only: index of the CR it surrounds

    bool operator==(const Region&) const = default;
};

// Boundary-inclusive sphere membership.
bool contains(const Region& region, const ScaledVec3& p, int scale);
bool contains(const RealVec3& center_mm, double radius_mm, const RealVec3& p_mm);

struct Workspace {
    RealVec3 min{-60, -60, 0};
    RealVec3 max{60, 60, 120};

    bool contains(const RealVec3& p_mm) const;
    double extent_mm() const;  // largest |coordinate| of any corner
    bool operator==(const Workspace&) const = default;
};

struct Limits {
    int max_rotations = 3;         // per synthesis
    double min_push_mm = 5.0;      // between consecutive rotations
    double max_insertion_mm = 150.0;

    bool operator==(const Limits&) const = default;
};

struct Scenario {
    std::string name;
    int scale = kDefaultScale;
    Workspace workspace;
    NeedlePose start;
    NeedleParams needle;
    Limits limits;
    std::vector<Region> regions;
    std::vector<int> tr_order;  // indices into regions, last entry is the final TR
    double dr_margin_mm = 4.0;  // shell width used for generated DRs
    double clearance_mm = 0.0;  // optional tip-radius inflation of CRs during planning

    // Throws ConfigError naming the offending field.
    void validate() const;

    // Adds a DR of radius CR + dr_margin_mm for every CR that has none.
    void attach_detection_regions();

    const Region& target(std::size_t order_index) const { return regions.at(static_cast<std::size_t>(tr_order.at(order_index))); }
    std::size_t target_count() const { return tr_order.size(); }
    std::vector<Region> critical_regions() const;
    // DR of the given CR index, or nullptr.
    const Region* detection_region_of(int cr_index) const;

    bool operator==(const Scenario&) const = default;
};

enum class CrKnowledge { All, None };
std::string_view to_string(CrKnowledge mode);
CrKnowledge cr_knowledge_from_string(std::string_view text);

// A critical region as seen by the planner: a-priori known or learned on the fly.
struct KnownCr {
    RealVec3 center_mm;
    double radius_mm = 0.0;
    double dr_radius_mm = 0.0;
    bool learned = false;
};

// Splits what the planner may use (known) from ground truth (actual, plant and monitors only).
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    KnowledgeBase(const Scenario& scenario, CrKnowledge mode);

    // Known-only base with an empty ground-truth set.
    static KnowledgeBase known_only(const Scenario& scenario, CrKnowledge mode);

    const std::vector<KnownCr>& known_crs() const { return known_; }
    std::size_t learned_count() const;
    void add_learned(const KnownCr& cr);
    KnownCr& known_at(std::size_t i) { return known_.at(i); }

    // Ground truth. Every access is counted so tests can assert the planner never looks.
    const std::vector<Region>& actual_regions() const;
    std::size_t actual_reads() const { return actual_reads_; }

private:
    std::vector<KnownCr> known_;
    std::vector<Region> actual_;
    mutable std::size_t actual_reads_ = 0;
};

// The five reference environments: no_cr, small_mid_cr, large_mid_cr, surface_crs, tunnel_crs.
std::vector<Scenario> builtin_scenarios();
std::vector<std::string> builtin_names();
// Throws ConfigError for unknown names.
Scenario builtin_scenario(std::string_view name);

// Shared base used by the builtins: workspace, start pose, needle, limits and the TR.
Scenario base_scenario(std::string name);

}  // namespace needlesteer
