#include "ludvae/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>

#include "ludvae/errors.hpp"

using nlohmann::json;

namespace ludvae {

namespace {

constexpr char kMagic[8] = {'L', 'V', 'A', 'E', 'C', 'K', 'P', '1'};
constexpr std::size_t kHashBytes = 32;

std::vector<unsigned char> sha256(const unsigned char* data, std::size_t len) {
  std::vector<unsigned char> digest(EVP_MAX_MD_SIZE);
  unsigned int dlen = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 || EVP_DigestFinal_ex(ctx, digest.data(), &dlen) != 1) {
    EVP_MD_CTX_free(ctx);
    throw CheckpointError("sha256 failure");
  }
  EVP_MD_CTX_free(ctx);
  digest.resize(dlen);
  return digest;
}

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  json header;
  header["format_version"] = data.format_version;
  header["iteration"] = data.iteration;
  header["master_seed"] = data.master_seed;
  header["adam_step"] = data.adam_step;
  header["config"] = data.config;
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : data.tensors) {
    dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset},
                   {"count", t.data.size()}});
    offset += t.data.size();
  }
  header["tensors"] = dir;
  const std::string hjson = header.dump();

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  append_u32(buf, data.format_version);
  append_u64(buf, hjson.size());
  buf.append(hjson);
  for (const auto& t : data.tensors)
    for (double v : t.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      append_u64(buf, bits);
    }
  const auto digest = sha256(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
  buf.append(reinterpret_cast<const char*>(digest.data()), digest.size());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("short checkpoint write: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 12 + kHashBytes || std::memcmp(buf.data(), kMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file: " + path);

  const std::size_t body = buf.size() - kHashBytes;
  const auto digest = sha256(reinterpret_cast<const unsigned char*>(buf.data()), body);
  if (digest.size() != kHashBytes ||
      std::memcmp(digest.data(), buf.data() + body, kHashBytes) != 0)
    throw CheckpointError("checkpoint hash verification failed: " + path);

  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  CheckpointData data;
  data.format_version = read_u32(p + 8);
  if (data.format_version != 1)
    throw CheckpointError("unsupported checkpoint format version " +
                          std::to_string(data.format_version) + " in " + path);
  const std::uint64_t hlen = read_u64(p + 12);
  if (20 + hlen > body) throw CheckpointError("corrupt checkpoint header: " + path);
  json header;
  try {
    header = json::parse(buf.substr(20, hlen));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header json: ") + e.what());
  }
  data.iteration = header.at("iteration").get<long>();
  data.master_seed = header.at("master_seed").get<std::uint64_t>();
  data.adam_step = header.at("adam_step").get<long>();
  data.config = header.at("config");

  const std::size_t payload = 20 + hlen;
  for (const auto& e : header.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<int>>();
    const std::uint64_t off = e.at("offset").get<std::uint64_t>();
    const std::uint64_t count = e.at("count").get<std::uint64_t>();
    if (payload + (off + count) * 8 > body) throw CheckpointError("corrupt tensor directory");
    t.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t bits = read_u64(p + payload + (off + i) * 8);
      std::memcpy(&t.data[i], &bits, 8);
    }
    data.tensors.push_back(std::move(t));
  }
  return data;
}

CheckpointData snapshot_checkpoint(const LudVae<float>& model, const Adam<float>& adam,
                                   long iteration, std::uint64_t master_seed,
                                   const nlohmann::json& config) {
  CheckpointData data;
  data.iteration = iteration;
  data.master_seed = master_seed;
  data.adam_step = adam.step_count();
  data.config = config;
  const auto& store = model.params();
  for (const auto& span : store.spans()) {
    NamedTensor t;
    t.name = span.name;
    t.shape = span.shape;
    t.data.resize(span.count());
    for (std::size_t i = 0; i < t.data.size(); ++i)
      t.data[i] = static_cast<double>(store.values()[span.offset + i]);
    data.tensors.push_back(std::move(t));
  }
  auto add_raw = [&](const std::string& name, const std::vector<double>& v) {
    NamedTensor t;
    t.name = name;
    t.shape = {static_cast<int>(v.size())};
    t.data = v;
    data.tensors.push_back(std::move(t));
  };
  add_raw("adam.m", const_cast<Adam<float>&>(adam).moment1());
  add_raw("adam.v", const_cast<Adam<float>&>(adam).moment2());
  return data;
}

void restore_checkpoint(const CheckpointData& data, LudVae<float>& model, Adam<float>* adam) {
  auto& store = model.params();
  std::size_t restored = 0;
  for (const auto& t : data.tensors) {
    if (t.name == "adam.m" || t.name == "adam.v") {
      if (adam) {
        auto& slot = (t.name == "adam.m") ? adam->moment1() : adam->moment2();
        if (slot.size() != t.data.size())
          throw CheckpointError("checkpoint optimizer state does not match this model");
        slot = t.data;
      }
      continue;
    }
    const nn::ParamSpan* span = store.find(t.name);
    if (!span)
      throw CheckpointError("checkpoint tensor '" + t.name + "' does not exist in this model");
    if (span->shape != t.shape || span->count() != t.data.size())
      throw CheckpointError("checkpoint tensor '" + t.name + "' has incompatible shape");
    for (std::size_t i = 0; i < t.data.size(); ++i)
      store.values()[span->offset + i] = static_cast<float>(t.data[i]);
    ++restored;
  }
  if (restored != store.spans().size())
    throw CheckpointError("checkpoint is missing model tensors (architecture mismatch)");
  if (adam) adam->set_step_count(data.adam_step);
}

}  // namespace ludvae
