#include "instasim/nn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace instasim::nn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string checkpoint_stem(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06d", epoch);
  return buf;
}

namespace {

void append(std::vector<float>& blob, const Tensor& t) {
  for (Real v : t.values()) blob.push_back(static_cast<float>(v));
}

void read_into(Tensor& t, const std::vector<float>& blob, std::size_t offset_floats) {
  if (offset_floats + t.size() > blob.size()) throw std::runtime_error("checkpoint: blob truncated");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(blob[offset_floats + i]);
}

}  // namespace

fs::path save_checkpoint(const fs::path& dir, int epoch, const std::map<std::string, const ParamStore*>& stores,
                         const json& extra) {
  fs::create_directories(dir);
  const std::string stem = checkpoint_stem(epoch);
  std::vector<float> blob;
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["epoch"] = epoch;
  manifest["dtype"] = "float32";
  manifest["extra"] = extra;
  json stores_json = json::object();
  for (const auto& [store_name, store] : stores) {
    json entries = json::array();
    for (const auto& [name, p] : store->params()) {
      const char* kinds[] = {"value", "first_moment", "second_moment"};
      const Tensor* tensors[] = {&p.value, &p.first_moment, &p.second_moment};
      for (int k = 0; k < 3; ++k) {
        entries.push_back({{"name", name},
                           {"kind", kinds[k]},
                           {"shape", p.value.shape()},
                           {"offset", blob.size() * sizeof(float)}});
        if (tensors[k]->same_shape(p.value)) {
          append(blob, *tensors[k]);
        } else {
          blob.insert(blob.end(), p.value.size(), 0.0f);
        }
      }
    }
    stores_json[store_name] = {{"optimizer_steps", store->optimizer_steps()}, {"tensors", entries}};
  }
  manifest["stores"] = stores_json;

  const fs::path bin = dir / (stem + ".bin");
  {
    std::ofstream out(bin, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + bin.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
  }
  {
    std::ofstream out(dir / (stem + ".json"));
    if (!out) throw std::runtime_error("checkpoint: cannot write manifest for " + stem);
    out << manifest.dump(1) << '\n';
  }
  return bin;
}

json load_checkpoint(const fs::path& bin_path, const std::map<std::string, ParamStore*>& stores) {
  fs::path manifest_path = bin_path;
  manifest_path.replace_extension(".json");
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("checkpoint: missing manifest " + manifest_path.string());
  std::ifstream bf(bin_path, std::ios::binary);
  if (!bf) throw std::runtime_error("checkpoint: missing blob " + bin_path.string());
  json manifest = json::parse(mf);
  if (manifest.value("format_version", -1) != kCheckpointFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version");
  }
  const auto bytes = fs::file_size(bin_path);
  std::vector<float> blob(bytes / sizeof(float));
  bf.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));

  for (const auto& [store_name, store] : stores) {
    if (!manifest["stores"].contains(store_name)) {
      throw std::runtime_error("checkpoint: store '" + store_name + "' not in manifest");
    }
    const json& sj = manifest["stores"][store_name];
    std::size_t restored = 0;
    for (const json& e : sj["tensors"]) {
      const std::string name = e["name"];
      if (!store->contains(name)) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
      Parameter& p = store->get(name);
      if (e["shape"].get<std::vector<int>>() != p.value.shape()) {
        throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
      }
      const std::string kind = e["kind"];
      Tensor* dst = &p.value;
      if (kind == "first_moment" || kind == "second_moment") {
        dst = kind == "first_moment" ? &p.first_moment : &p.second_moment;
        if (!dst->same_shape(p.value)) *dst = Tensor(p.value.shape());
      } else {
        ++restored;
      }
      read_into(*dst, blob, e["offset"].get<std::size_t>() / sizeof(float));
    }
    if (restored != store->params().size()) {
      throw std::runtime_error("checkpoint: store '" + store_name + "' is missing parameters");
    }
    store->set_optimizer_steps(sj.value("optimizer_steps", std::int64_t{0}));
    store->bump_version();
  }
  return manifest;
}

}  // namespace instasim::nn
