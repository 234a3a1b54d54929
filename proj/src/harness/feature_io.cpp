#include "xfer/harness/feature_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "byte_io.hpp"

namespace xfer::io {

std::vector<std::uint8_t> encode_features(const FeatureSet& fs) {
  std::vector<std::uint8_t> out(kFeatureMagic, kFeatureMagic + 5);
  detail::put_u32(out, static_cast<std::uint32_t>(fs.count()));
  detail::put_u32(out, static_cast<std::uint32_t>(fs.dim()));
  out.reserve(out.size() + fs.data().size() * 4);
  for (float v : fs.data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureSet decode_features(const std::vector<std::uint8_t>& bytes) {
  detail::Reader in(bytes);
  in.expect_magic(kFeatureMagic);
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  const std::size_t n = static_cast<std::size_t>(count) * dim;
  in.require(n * 4);
  std::vector<float> data(n);
  for (auto& v : data) v = std::bit_cast<float>(in.u32());
  if (!in.at_end()) {
    throw Error("feature file: " + std::to_string(bytes.size() - in.offset()) +
                " trailing bytes after offset " + std::to_string(in.offset()));
  }
  return FeatureSet("", "", dim, std::move(data));
}

std::string features_to_csv(const FeatureSet& fs) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < fs.count(); ++i) {
    const auto row = fs.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, row[j]);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

FeatureSet features_from_csv(const std::string& text) {
  std::vector<float> data;
  std::size_t dim = 0, line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::size_t fields = 0;
    const char* p = line.data();
    const char* e = line.data() + line.size();
    while (true) {
      float v = 0.0f;
      const auto res = std::from_chars(p, e, v);
      if (res.ec != std::errc()) {
        throw Error("feature csv: bad number on line " + std::to_string(line_no));
      }
      data.push_back(v);
      ++fields;
      p = res.ptr;
      if (p == e) break;
      if (*p != ',') throw Error("feature csv: expected ',' on line " + std::to_string(line_no));
      ++p;
    }
    if (dim == 0) dim = fields;
    if (fields != dim) {
      throw Error("feature csv: line " + std::to_string(line_no) + " has " +
                  std::to_string(fields) + " values, expected " + std::to_string(dim));
    }
  }
  if (data.empty()) throw Error("feature csv: no vectors");
  return FeatureSet("", "", dim, std::move(data));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_features(const FeatureSet& fs, const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    write_text_file(path, features_to_csv(fs));
  } else {
    write_file_bytes(path, encode_features(fs));
  }
  nlohmann::ordered_json meta;
  meta["dataset_id"] = fs.dataset_id();
  meta["domain_label"] = fs.domain_label();
  meta["dim"] = fs.dim();
  meta["count"] = fs.count();
  meta["sample_seed"] = fs.sample_seed();
  write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

FeatureSet load_features(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) {
    throw Error("feature file " + path.string() + ": missing sidecar " + side.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(side));
  } catch (const nlohmann::json::exception& e) {
    throw Error("feature sidecar " + side.string() + ": " + e.what());
  }
  FeatureSet raw = path.extension() == ".csv" ? features_from_csv(read_text_file(path))
                                              : decode_features(read_file_bytes(path));
  try {
    const auto dim = meta.at("dim").get<std::size_t>();
    if (dim != raw.dim()) {
      throw Error("feature file " + path.string() + ": dimension mismatch (payload " +
                  std::to_string(raw.dim()) + ", sidecar " + std::to_string(dim) + ")");
    }
    if (meta.contains("count") && meta["count"].get<std::size_t>() != raw.count()) {
      throw Error("feature file " + path.string() + ": count mismatch with sidecar");
    }
    return FeatureSet(meta.at("dataset_id").get<std::string>(),
                      meta.at("domain_label").get<std::string>(), raw.dim(),
                      std::vector<float>(raw.data().begin(), raw.data().end()),
                      meta.value("sample_seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw Error("feature sidecar " + side.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace xfer::io
