#include "xfer/harness/grid_io.hpp"

#include <bit>

#include <json.hpp>

#include "byte_io.hpp"
#include "xfer/harness/feature_io.hpp"

namespace xfer::io {

std::vector<std::uint8_t> encode_grids(std::span<const GridRecord> records) {
  std::vector<std::uint8_t> out;
  for (const auto& r : records) {
    const std::size_t n = r.values();
    const bool f32 = r.dtype == GridDType::F32;
    if ((f32 ? r.f32.size() : r.u16.size()) != n) {
      throw Error("grid record: payload size does not match its header");
    }
    out.insert(out.end(), kGridMagic, kGridMagic + 5);
    detail::put_u32(out, r.height);
    detail::put_u32(out, r.width);
    detail::put_u32(out, r.channels);
    detail::put_u32(out, static_cast<std::uint32_t>(r.dtype));
    if (f32) {
      for (float v : r.f32) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    } else {
      for (std::uint16_t v : r.u16) detail::put_u16(out, v);
    }
  }
  return out;
}

std::vector<GridRecord> decode_grids(const std::vector<std::uint8_t>& bytes) {
  std::vector<GridRecord> out;
  detail::Reader in(bytes);
  while (!in.at_end()) {
    in.expect_magic(kGridMagic);
    GridRecord r;
    r.height = in.u32();
    r.width = in.u32();
    r.channels = in.u32();
    const std::uint32_t dtype = in.u32();
    if (dtype > 1) {
      throw Error("grid record: unknown dtype " + std::to_string(dtype) + " at offset " +
                  std::to_string(in.offset() - 4));
    }
    r.dtype = static_cast<GridDType>(dtype);
    const std::size_t n = r.values();
    if (r.dtype == GridDType::F32) {
      in.require(n * 4);
      r.f32.resize(n);
      for (auto& v : r.f32) v = std::bit_cast<float>(in.u32());
    } else {
      in.require(n * 2);
      r.u16.resize(n);
      for (auto& v : r.u16) v = in.u16();
    }
    out.push_back(std::move(r));
  }
  return out;
}

void save_grids(std::span<const GridRecord> records, const std::filesystem::path& path) {
  write_file_bytes(path, encode_grids(records));
}

std::vector<GridRecord> load_grids(const std::filesystem::path& path) {
  return decode_grids(read_file_bytes(path));
}

GridRecord image_record(const toy::SynthImage& img) {
  GridRecord r;
  r.height = static_cast<std::uint32_t>(img.height);
  r.width = static_cast<std::uint32_t>(img.width);
  r.channels = static_cast<std::uint32_t>(img.channels);
  r.dtype = GridDType::F32;
  const std::size_t plane = img.height * img.width;
  r.f32.resize(plane * img.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      r.f32[c * plane + p] = static_cast<float>(img.pixels[p * img.channels + c]);
    }
  }
  return r;
}

GridRecord label_record(const toy::SynthImage& img) {
  GridRecord r;
  r.height = static_cast<std::uint32_t>(img.height);
  r.width = static_cast<std::uint32_t>(img.width);
  r.channels = 1;
  r.dtype = GridDType::U16;
  const auto labels = img.segmentation.labels();
  r.u16.assign(labels.begin(), labels.end());
  return r;
}

GridRecord depth_record(const toy::SynthImage& img) {
  GridRecord r;
  r.height = static_cast<std::uint32_t>(img.height);
  r.width = static_cast<std::uint32_t>(img.width);
  r.channels = 1;
  r.dtype = GridDType::F32;
  for (double d : img.depth.depth()) r.f32.push_back(static_cast<float>(d));
  return r;
}

namespace {

nlohmann::ordered_json annotations(const std::vector<toy::SynthImage>& images) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& img : images) {
    nlohmann::ordered_json j;
    j["component"] = img.component;
    j["image_class"] = img.image_class;
    auto boxes = nlohmann::ordered_json::array();
    for (const auto& b : img.boxes) {
      boxes.push_back({{"x", b.x()}, {"y", b.y()}, {"w", b.w()}, {"h", b.h()},
                       {"class_id", b.class_id()}});
    }
    j["boxes"] = std::move(boxes);
    auto kps = nlohmann::ordered_json::array();
    for (const auto& inst : img.keypoints) {
      auto pts = nlohmann::ordered_json::array();
      for (const auto& k : inst.keypoints) pts.push_back({k.x, k.y, k.visible ? 1 : 0});
      kps.push_back(std::move(pts));
    }
    j["keypoints"] = std::move(kps);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

void dump_dataset(const toy::SynthDataset& ds, const std::filesystem::path& dir) {
  const std::pair<const char*, const std::vector<toy::SynthImage>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}};
  for (const auto& [name, images] : splits) {
    std::vector<GridRecord> records;
    for (const auto& img : *images) {
      records.push_back(image_record(img));
      records.push_back(label_record(img));
      records.push_back(depth_record(img));
    }
    const std::string stem = ds.id() + "." + name;
    save_grids(records, dir / (stem + ".grid"));
    nlohmann::ordered_json meta;
    meta["dataset_id"] = ds.id();
    meta["domain_label"] = ds.spec.domain_label;
    meta["split"] = name;
    meta["records_per_image"] = {"image", "labels", "depth"};
    meta["images"] = annotations(*images);
    write_text_file(dir / (stem + ".json"), meta.dump(1) + "\n");
  }
}

}  // namespace xfer::io
