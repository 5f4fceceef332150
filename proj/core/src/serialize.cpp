#include "kernelformer/serialize.hpp"

#include <cmath>
#include <fstream>

#include "kernelformer/error.hpp"

namespace kf {

namespace {

using nlohmann::json;

json mat_to_json(const SparseMat& m) {
  json entries = json::array();
  for (size_t i = 0; i < m.nnz(); ++i) {
    if (!std::isfinite(m.v[i])) throw Error("non-finite weight in spec");
    entries.push_back(json::array(
        {m.ri[i], m.ci[i], m.v[i]}));
  }
  return json{{"rows", m.rows}, {"cols", m.cols}, {"entries", entries}};
}

SparseMat mat_from_json(const json& j) {
  SparseMat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  for (const json& e : j.at("entries"))
    m.add(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
  if (!m.sorted_unique()) throw Error("matrix entries not sorted row-major");
  return m;
}

json head_to_json(const AttentionHead& h) {
  json j{{"activation", h.act == Activation::ReLU ? "relu" : "softmax_masked"},
         {"Q", mat_to_json(h.Q)},
         {"K", mat_to_json(h.K)},
         {"V", mat_to_json(h.V)}};
  if (h.act == Activation::SoftmaxMasked) {
    j["mask"] = h.mask;
    j["query_col"] = h.softmax_query_col;
  }
  return j;
}

AttentionHead head_from_json(const json& j) {
  AttentionHead h;
  std::string act = j.at("activation").get<std::string>();
  if (act == "relu") {
    h.act = Activation::ReLU;
  } else if (act == "softmax_masked") {
    h.act = Activation::SoftmaxMasked;
    h.mask = j.at("mask").get<std::vector<int>>();
    h.softmax_query_col = j.at("query_col").get<int>();
  } else {
    throw Error("unknown activation '" + act + "'");
  }
  h.Q = mat_from_json(j.at("Q"));
  h.K = mat_from_json(j.at("K"));
  h.V = mat_from_json(j.at("V"));
  return h;
}

json ffn_to_json(const FFNStack& f) {
  json layers = json::array();
  for (const FFNLayer& L : f.layers) {
    for (double b : L.bias)
      if (!std::isfinite(b)) throw Error("non-finite bias in spec");
    layers.push_back(json{{"W", mat_to_json(L.W)}, {"bias", L.bias}});
  }
  return json{{"residual", f.residual}, {"layers", layers}};
}

FFNStack ffn_from_json(const json& j) {
  FFNStack f;
  f.residual = j.at("residual").get<bool>();
  for (const json& lj : j.at("layers")) {
    FFNLayer L;
    L.W = mat_from_json(lj.at("W"));
    L.bias = lj.at("bias").get<std::vector<double>>();
    f.layers.push_back(std::move(L));
  }
  return f;
}

json manifest_to_json(const BuildManifest& m) {
  return json{{"n", m.n},
              {"ambient_dim", m.D},
              {"bandwidth", m.h},
              {"coord_bound", m.b},
              {"value_bound", m.R},
              {"safety_factor", m.safety_factor},
              {"offset_small", m.m_small},
              {"offset_big", m.m_big},
              {"interaction_c", std::vector<double>(m.interaction_c,
                                                    m.interaction_c + 4)},
              {"stage_u", std::vector<double>(m.stage_u, m.stage_u + 4)},
              {"stage_kdata", std::vector<double>(m.stage_kdata,
                                                  m.stage_kdata + 4)}};
}

BuildManifest manifest_from_json(const json& j) {
  BuildManifest m;
  m.present = true;
  m.n = j.at("n").get<int>();
  m.D = j.at("ambient_dim").get<int>();
  m.h = j.at("bandwidth").get<double>();
  m.b = j.at("coord_bound").get<double>();
  m.R = j.at("value_bound").get<double>();
  m.safety_factor = j.at("safety_factor").get<double>();
  m.m_small = j.at("offset_small").get<double>();
  m.m_big = j.at("offset_big").get<double>();
  auto c = j.at("interaction_c").get<std::vector<double>>();
  auto u = j.at("stage_u").get<std::vector<double>>();
  auto k = j.at("stage_kdata").get<std::vector<double>>();
  if (c.size() != 4 || u.size() != 4 || k.size() != 4)
    throw Error("manifest stage arrays must have length 4");
  for (int i = 0; i < 4; ++i) {
    m.interaction_c[i] = c[i];
    m.stage_u[i] = u[i];
    m.stage_kdata[i] = k[i];
  }
  return m;
}

}  // namespace

json spec_to_json(const TransformerSpec& spec) {
  json blocks = json::array();
  for (const Block& b : spec.blocks) {
    json heads = json::array();
    for (const AttentionHead& h : b.heads) heads.push_back(head_to_json(h));
    blocks.push_back(json{{"heads", heads}, {"ffn", ffn_to_json(b.ffn)}});
  }
  json j{{"schema_version", 1},
         {"kind", "transformer_spec"},
         {"arch",
          json{{"num_blocks", spec.arch.num_blocks},
               {"max_heads", spec.arch.max_heads},
               {"d_embed", spec.arch.d_embed},
               {"ell", spec.arch.ell},
               {"max_ffn_depth", spec.arch.max_ffn_depth},
               {"ffn_width", spec.arch.ffn_width},
               {"value_bound", spec.arch.value_bound},
               {"kappa", spec.arch.kappa}}},
         {"decoder", json{{"row", spec.decoder_row}, {"col", spec.decoder_col}}},
         {"blocks", blocks}};
  j["manifest"] = spec.manifest.present ? manifest_to_json(spec.manifest)
                                        : json(nullptr);
  return j;
}

TransformerSpec spec_from_json(const json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw Error("unsupported spec schema version");
  TransformerSpec s;
  const json& a = j.at("arch");
  s.arch.num_blocks = a.at("num_blocks").get<int>();
  s.arch.max_heads = a.at("max_heads").get<int>();
  s.arch.d_embed = a.at("d_embed").get<int>();
  s.arch.ell = a.at("ell").get<int>();
  s.arch.max_ffn_depth = a.at("max_ffn_depth").get<int>();
  s.arch.ffn_width = a.at("ffn_width").get<int>();
  s.arch.value_bound = a.at("value_bound").get<double>();
  s.arch.kappa = a.at("kappa").get<double>();
  s.decoder_row = j.at("decoder").at("row").get<int>();
  s.decoder_col = j.at("decoder").at("col").get<int>();
  for (const json& bj : j.at("blocks")) {
    Block b;
    for (const json& hj : bj.at("heads")) b.heads.push_back(head_from_json(hj));
    b.ffn = ffn_from_json(bj.at("ffn"));
    s.blocks.push_back(std::move(b));
  }
  if (!j.at("manifest").is_null())
    s.manifest = manifest_from_json(j.at("manifest"));
  return s;
}

std::string spec_to_string(const TransformerSpec& spec) {
  return spec_to_json(spec).dump();
}

TransformerSpec spec_from_string(const std::string& text) {
  return spec_from_json(json::parse(text));
}

void save_spec(const TransformerSpec& spec, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << spec_to_string(spec);
  if (!f) throw Error("write failed for '" + path + "'");
}

TransformerSpec load_spec(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return spec_from_string(text);
}

}  // namespace kf
