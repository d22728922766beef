#include "asymlab/harness/checkpoint.hpp"

#include "asymlab/error.hpp"

namespace asymlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

Tensor vector_tensor(const Vec& v) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(v.size())};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

Vec tensor_vector(const Tensor& t) {
  require(t.dims.size() == 1, ErrorCode::DimensionMismatch, "checkpoint: expected a rank-1 tensor");
  return Eigen::Map<const Vec>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
}

std::string file_for(const std::string& name) {
  require(!name.empty() && name.find_first_of("/\\") == std::string::npos, ErrorCode::InvalidArgument,
          "checkpoint: parameter name '" + name + "' is not a plain file name");
  return name + ".atns";
}

void check_manifest(const json& m, const char* kind) {
  require(m.value("kind", "") == kind, ErrorCode::ConfigError,
          std::string("checkpoint: manifest is not a ") + kind);
  require(m.value("version", 0) == kManifestVersion, ErrorCode::ConfigError,
          "checkpoint: unsupported manifest version");
}

Mat read_matrix(const fs::path& dir, const json& entry) {
  const Mat m = read_tensor(dir / entry.at("file").get<std::string>()).to_matrix();
  require(m.rows() == entry.at("rows").get<Eigen::Index>() && m.cols() == entry.at("cols").get<Eigen::Index>(),
          ErrorCode::DimensionMismatch, "checkpoint: tensor shape disagrees with manifest");
  return m;
}

}  // namespace

Tensor derivative_to_tensor(const DerivativeTensor& t) {
  Tensor out = Tensor::from_matrix(t.values());
  out.dims = {t.out_dim()};
  for (int k = 0; k < t.order(); ++k) out.dims.push_back(t.latent_dim());
  return out;
}

DerivativeTensor derivative_from_tensor(const Tensor& t) {
  require(t.dims.size() >= 2 && t.dims.size() <= 4, ErrorCode::DimensionMismatch,
          "derivative tensor: rank must be 2..4");
  for (std::size_t k = 2; k < t.dims.size(); ++k)
    require(t.dims[k] == t.dims[1], ErrorCode::DimensionMismatch,
            "derivative tensor: latent axes must have equal length");
  DerivativeTensor out(static_cast<int>(t.dims.size() - 1), t.dims[0], t.dims[1]);
  Tensor flat = t;
  flat.dims = {t.dims[0], t.element_count() / std::max<std::uint64_t>(t.dims[0], 1)};
  out.values() = flat.to_matrix();
  return out;
}

void save_model_checkpoint(const OutputDir& out, const std::string& dir, const SlotAutoencoder& model) {
  json params = json::array();
  for (const auto& p : model.parameters().params) {
    const std::string file = file_for(p.name);
    out.write_tensor(dir + "/" + file, Tensor::from_matrix(p.value));
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"file", file}});
  }
  out.write_json(dir + "/manifest.json", {{"kind", "slot_autoencoder"},
                                          {"version", kManifestVersion},
                                          {"model", to_json(model.config())},
                                          {"parameters", params}});
}

SlotAutoencoder load_model_checkpoint(const fs::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  check_manifest(m, "slot_autoencoder");
  ad::ParameterSet ps;
  for (const auto& entry : m.at("parameters")) ps.add(entry.at("name"), read_matrix(dir, entry));
  return SlotAutoencoder(model_config_from_json(m.at("model")), std::move(ps));
}

void save_attention_decoder(const OutputDir& out, const std::string& dir, const AttentionDecoder& d) {
  require(!d.layers.empty(), ErrorCode::InvalidArgument, "attention decoder: no layers");
  json layers = json::array();
  auto put = [&](const std::string& name, const Mat& m) {
    const std::string file = file_for(name);
    out.write_tensor(dir + "/" + file, Tensor::from_matrix(m));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"file", file}};
  };
  for (std::size_t i = 0; i < d.layers.size(); ++i) {
    const auto& l = d.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    json entry = {{"heads", l.heads},
                  {"scale", l.scale},
                  {"w_q", put(p + "w_q", l.w_q)},
                  {"w_k", put(p + "w_k", l.w_k)},
                  {"w_v", put(p + "w_v", l.w_v)}};
    if (i == 0) entry["query_inputs"] = put(p + "query_inputs", l.query_inputs);
    layers.push_back(entry);
  }
  out.write_tensor(dir + "/head.b1.atns", vector_tensor(d.head.b1));
  out.write_tensor(dir + "/head.b2.atns", vector_tensor(d.head.b2));
  const json head = {{"w1", put("head.w1", d.head.w1)},
                     {"b1", "head.b1.atns"},
                     {"w2", put("head.w2", d.head.w2)},
                     {"b2", "head.b2.atns"}};
  out.write_json(dir + "/manifest.json", {{"kind", "attention_decoder"},
                                          {"version", kManifestVersion},
                                          {"layers", layers},
                                          {"head", head}});
}

AttentionDecoder load_attention_decoder(const fs::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  check_manifest(m, "attention_decoder");
  AttentionDecoder d;
  for (const auto& entry : m.at("layers")) {
    CrossAttentionLayer l;
    l.heads = entry.at("heads");
    l.scale = entry.at("scale");
    l.w_q = read_matrix(dir, entry.at("w_q"));
    l.w_k = read_matrix(dir, entry.at("w_k"));
    l.w_v = read_matrix(dir, entry.at("w_v"));
    if (entry.contains("query_inputs")) l.query_inputs = read_matrix(dir, entry.at("query_inputs"));
    d.layers.push_back(std::move(l));
  }
  const json& h = m.at("head");
  d.head.w1 = read_matrix(dir, h.at("w1"));
  d.head.b1 = tensor_vector(read_tensor(dir / h.at("b1").get<std::string>()));
  d.head.w2 = read_matrix(dir, h.at("w2"));
  d.head.b2 = tensor_vector(read_tensor(dir / h.at("b2").get<std::string>()));
  d.layers.front().validate(d.layers.front().query_inputs.cols());
  d.head.validate(d.layers.back().token_dim());
  return d;
}

}  // namespace asymlab
