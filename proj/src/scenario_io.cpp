#include "needlesteer/scenario_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace needlesteer {

namespace {

using Json = nlohmann::ordered_json;

int line_of(std::string_view text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n' ? 1 : 0;
    return line;
}

const Json& field(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(path + "." + key + ": missing");
    return *it;
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double real(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
}

int integer(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return v.get<int>();
}

RealVec3 vec(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path + ": expected a 3-element array");
    return {real(v[0], path + "[0]"), real(v[1], path + "[1]"), real(v[2], path + "[2]")};
}

Json to_json(const RealVec3& v) { return Json::array({v.x, v.y, v.z}); }

}  // namespace

Scenario load_scenario(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(e.what(), line_of(text, e.byte == 0 ? 0 : e.byte - 1));
    }
    if (!doc.is_object()) throw ParseError("scenario document must be an object", 1);

    Scenario s;
    const auto& name = field(doc, "name", "");
    if (!name.is_string()) throw ConfigError("name: expected a string");
    s.name = name.get<std::string>();
    s.scale = integer(field(doc, "scale", ""), "scale");
    if (s.scale <= 0) throw ConfigError("scale: must be a positive integer");

    const Json& ws = field(doc, "workspace", "");
    s.workspace.min = vec(field(ws, "min", "workspace"), "workspace.min");
    s.workspace.max = vec(field(ws, "max", "workspace"), "workspace.max");

    const Json& nd = field(doc, "needle", "");
    const RealVec3 start_pos = vec(field(nd, "start_pos", "needle"), "needle.start_pos");
    s.start.tangent = vec(field(nd, "start_tangent", "needle"), "needle.start_tangent");
    s.start.normal = vec(field(nd, "start_normal", "needle"), "needle.start_normal");
    s.needle.radius_mm = real(field(nd, "radius_mm", "needle"), "needle.radius_mm");
    s.needle.speed_mm_s = real(field(nd, "speed_mm_s", "needle"), "needle.speed_mm_s");
    s.needle.dt_s = real(field(nd, "dt_s", "needle"), "needle.dt_s");
    s.needle.scale = s.scale;

    const Json& lim = field(doc, "limits", "");
    s.limits.max_rotations = integer(field(lim, "max_rotations", "limits"), "limits.max_rotations");
    s.limits.min_push_mm = real(field(lim, "min_push_mm", "limits"), "limits.min_push_mm");
    s.limits.max_insertion_mm = real(field(lim, "max_insertion_mm", "limits"), "limits.max_insertion_mm");

    if (doc.contains("dr_margin_mm")) s.dr_margin_mm = real(doc["dr_margin_mm"], "dr_margin_mm");
    if (doc.contains("clearance_mm")) s.clearance_mm = real(doc["clearance_mm"], "clearance_mm");

    // Grid range is checked before anything is quantized.
    try {
        quantize_scalar(s.workspace.extent_mm(), s.scale);
    } catch (const RangeError& e) {
        throw ConfigError(std::string("workspace: ") + e.what());
    }
    try {
        s.start.pos = quantize(start_pos, s.scale);
    } catch (const RangeError& e) {
        throw ConfigError(std::string("needle.start_pos: ") + e.what());
    }

    const Json& regions = field(doc, "regions", "");
    if (!regions.is_array()) throw ConfigError("regions: expected an array");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const std::string path = "regions[" + std::to_string(i) + "]";
        const Json& r = regions[i];
        Region reg;
        const Json& kind = field(r, "kind", path);
        if (!kind.is_string()) throw ConfigError(join(path, "kind") + ": expected a string");
        try {
            reg.kind = region_kind_from_string(kind.get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(join(path, "kind") + ": " + e.what());
        }
        try {
            reg.center = quantize(vec(field(r, "center", path), join(path, "center")), s.scale);
        } catch (const RangeError& e) {
            throw ConfigError(join(path, "center") + ": " + e.what());
        }
        reg.radius_mm = real(field(r, "radius_mm", path), join(path, "radius_mm"));
        if (r.contains("known")) {
            if (!r["known"].is_boolean()) throw ConfigError(join(path, "known") + ": expected a boolean");
            reg.known = r["known"].get<bool>();
        }
        if (r.contains("parent")) reg.parent = integer(r["parent"], join(path, "parent"));
        if (reg.kind == RegionKind::DR && !r.contains("parent")) {
            throw ConfigError(join(path, "parent") + ": DR must name its CR");
        }
        s.regions.push_back(reg);
    }

    const Json& order = field(doc, "tr_order", "");
    if (!order.is_array()) throw ConfigError("tr_order: expected an array");
    for (std::size_t i = 0; i < order.size(); ++i) {
        s.tr_order.push_back(integer(order[i], "tr_order[" + std::to_string(i) + "]"));
    }

    s.validate();
    s.attach_detection_regions();
    s.validate();
    return s;
}

std::string save_scenario(const Scenario& s) {
    Json doc;
    doc["name"] = s.name;
    doc["scale"] = s.scale;
    doc["workspace"] = {{"min", to_json(s.workspace.min)}, {"max", to_json(s.workspace.max)}};
    doc["needle"] = {{"start_pos", to_json(unquantize(s.start.pos, s.scale))},
                     {"start_tangent", to_json(s.start.tangent)},
                     {"start_normal", to_json(s.start.normal)},
                     {"radius_mm", s.needle.radius_mm},
                     {"speed_mm_s", s.needle.speed_mm_s},
                     {"dt_s", s.needle.dt_s}};
    doc["limits"] = {{"max_rotations", s.limits.max_rotations},
                     {"min_push_mm", s.limits.min_push_mm},
                     {"max_insertion_mm", s.limits.max_insertion_mm}};
    doc["dr_margin_mm"] = s.dr_margin_mm;
    doc["clearance_mm"] = s.clearance_mm;
    Json regions = Json::array();
    for (const Region& r : s.regions) {
        Json j;
        j["kind"] = std::string(to_string(r.kind));
        j["center"] = to_json(unquantize(r.center, s.scale));
        j["radius_mm"] = r.radius_mm;
        j["known"] = r.known;
        if (r.kind == RegionKind::DR) j["parent"] = r.parent;
        regions.push_back(std::move(j));
    }
    doc["regions"] = std::move(regions);
    doc["tr_order"] = s.tr_order;
    return doc.dump(2) + "\n";
}

Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str());
}

void save_scenario_file(const Scenario& scenario, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write scenario file '" + path.string() + "'");
    out << save_scenario(scenario);
}

Scenario resolve_scenario(const std::string& name_or_path) {
    for (const std::string& n : builtin_names()) {
        if (n == name_or_path) return builtin_scenario(n);
    }
    return load_scenario_file(name_or_path);
}

}  // namespace needlesteer
