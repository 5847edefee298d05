#pragma once

#include <json.hpp>

#include "scaresnet/backbone.hpp"

namespace scaresnet {

using json = nlohmann::json;

inline json to_json(const LevelQuadruple& q, bool normalized = true) {
  auto ls = q.levels_descending();
  json j;
  if (normalized) {
    j["x"] = ls[0];
    j["y"] = ls[1];
    j["z"] = ls[2];
  } else {
    j["x"] = q.x;
    j["y"] = q.y;
    j["z"] = q.z;
  }
  j["w"] = q.w;
  j["a"] = q.a;
  j["b"] = q.b;
  j["c"] = q.c;
  j["d"] = q.d;
  return j;
}

inline LevelQuadruple level_quadruple_from_json(const json& j) {
  LevelQuadruple q{j.at("x").get<int>(), j.at("y").get<int>(),
                   j.at("z").get<int>(), j.at("w").get<int>(),
                   j.at("a").get<int>(), j.at("b").get<int>(),
                   j.at("c").get<int>(), j.at("d").get<int>()};
  q.validate();
  return q;
}

inline json to_json(const AxisPoolingParams& p) {
  return json{{"kernel", p.kernel},
              {"stride", p.stride},
              {"padding", p.padding},
              {"branch", pool_branch_name(p.branch)},
              {"t", p.judgment}};
}

inline json to_json(const MHCCAConfig& c) {
  return json{{"heads", c.heads},
              {"qk_channels_per_head", c.qk_channels_per_head},
              {"recurrence", c.recurrence},
              {"pe_base", c.pe_base},
              {"residual_scale_init", c.residual_scale_init}};
}

inline void apply_json(MHCCAConfig& c, const json& j) {
  if (j.contains("heads")) c.heads = j["heads"].get<int>();
  if (j.contains("qk_channels_per_head"))
    c.qk_channels_per_head = j["qk_channels_per_head"].get<int>();
  if (j.contains("recurrence")) c.recurrence = j["recurrence"].get<int>();
  if (j.contains("pe_base")) c.pe_base = j["pe_base"].get<double>();
  if (j.contains("residual_scale_init"))
    c.residual_scale_init = j["residual_scale_init"].get<double>();
}

inline json to_json(const SPPRCSPConfig& c) {
  return json{{"levels", to_json(c.sppr.levels, false)},
              {"interpretation", interpretation_name(c.sppr.interpretation)},
              {"se_ratio", c.se_ratio},
              {"dse_kernel", c.dse_kernel},
              {"c_out", c.c_out},
              {"dse_before", c.dse_before},
              {"dse_after", c.dse_after},
              {"se_enabled", c.se_enabled}};
}

inline void apply_json(SPPRCSPConfig& c, const json& j) {
  if (j.contains("levels"))
    c.sppr.levels = level_quadruple_from_json(j["levels"]);
  if (j.contains("interpretation"))
    c.sppr.interpretation =
        interpretation_from_name(j["interpretation"].get<std::string>());
  if (j.contains("se_ratio")) c.se_ratio = j["se_ratio"].get<int>();
  if (j.contains("dse_kernel")) c.dse_kernel = j["dse_kernel"].get<int>();
  if (j.contains("c_out")) c.c_out = j["c_out"].get<int>();
  if (j.contains("dse_before")) c.dse_before = j["dse_before"].get<bool>();
  if (j.contains("dse_after")) c.dse_after = j["dse_after"].get<bool>();
  if (j.contains("se_enabled")) c.se_enabled = j["se_enabled"].get<bool>();
}

inline json to_json(const BackboneConfig& c) {
  json stages = json::array();
  for (const auto& s : c.stages)
    stages.push_back(json{{"blocks", s.blocks},
                          {"type", block_type_name(s.type)},
                          {"out_channels", s.out_channels},
                          {"stride", s.stride}});
  return json{{"preset", c.preset},
              {"stem",
               {{"kernel", c.stem.kernel},
                {"stride", c.stem.stride},
                {"out_channels", c.stem.out_channels},
                {"maxpool", c.stem.maxpool}}},
              {"stages", stages},
              {"cca_insert_after", c.cca_after},
              {"cca", to_json(c.cca)},
              {"spprcsp", to_json(c.spprcsp)},
              {"gn_groups", c.gn_groups}};
}

/// Overrides only the keys present in j; start from a preset for the rest.
inline void apply_json(BackboneConfig& c, const json& j) {
  if (j.contains("preset"))
    c = BackboneConfig::preset_by_name(j["preset"].get<std::string>());
  if (j.contains("stem")) {
    const json& s = j["stem"];
    if (s.contains("kernel")) c.stem.kernel = s["kernel"].get<int>();
    if (s.contains("stride")) c.stem.stride = s["stride"].get<int>();
    if (s.contains("out_channels"))
      c.stem.out_channels = s["out_channels"].get<int>();
    if (s.contains("maxpool")) c.stem.maxpool = s["maxpool"].get<bool>();
  }
  if (j.contains("stages")) {
    c.stages.clear();
    for (const json& s : j["stages"]) {
      StageSpec spec;
      spec.blocks = s.at("blocks").get<int>();
      spec.type = block_type_from_name(s.at("type").get<std::string>());
      spec.out_channels = s.at("out_channels").get<int>();
      spec.stride = s.value("stride", 1);
      c.stages.push_back(spec);
    }
  }
  if (j.contains("cca_insert_after"))
    c.cca_after = j["cca_insert_after"].get<std::vector<int>>();
  if (j.contains("cca")) apply_json(c.cca, j["cca"]);
  if (j.contains("spprcsp")) apply_json(c.spprcsp, j["spprcsp"]);
  if (j.contains("gn_groups")) c.gn_groups = j["gn_groups"].get<int>();
}

inline json to_json(const Shape& s) { return json(s); }

inline json to_json(const ShapeTrace& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row{{"layer", r.layer},
             {"in", r.in},
             {"out", r.out},
             {"params", r.params},
             {"mult_adds", r.mult_adds}};
    if (!r.details.empty()) {
      json det = json::array();
      for (const auto& d : r.details)
        det.push_back(json{
            {"name", d.name}, {"params", d.params}, {"mult_adds", d.mult_adds}});
      row["details"] = det;
    }
    rows.push_back(std::move(row));
  }
  return json{{"input", t.input},
              {"rows", rows},
              {"total",
               {{"params", t.total_params},
                {"mult_adds", t.total_mult_adds}}}};
}

inline json to_json(const ParamCountReport& r) {
  json layers = json::array();
  for (const auto& l : r.layers)
    layers.push_back(json{
        {"layer", l.layer}, {"params", l.params}, {"mult_adds", l.mult_adds}});
  json j{{"input", r.input},
         {"params", r.params},
         {"mult_adds", r.mult_adds},
         {"layers", layers}};
  if (r.compared_plain) {
    j["plain_params"] = r.plain_params;
    j["plain_mult_adds"] = r.plain_mult_adds;
    j["param_ratio"] = r.param_ratio;
    j["mult_add_ratio"] = r.mult_add_ratio;
  }
  return j;
}

}  // namespace scaresnet
