#include "egoqa/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace egoqa::io {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot write " + path);
  out << content;
  require(out.good(), Errc::io_error, "write failed for " + path);
}

// ---------------------------------------------------------------------------
// PLY
// ---------------------------------------------------------------------------

namespace {

void put_le32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float bits_to_float(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

std::uint32_t float_to_bits(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  return bits;
}

struct PlyProperty {
  std::string type;
  std::string name;
};

int property_size(const std::string& type) {
  if (type == "float" || type == "float32" || type == "int" || type == "int32" ||
      type == "uint" || type == "uint32") {
    return 4;
  }
  if (type == "double" || type == "float64") return 8;
  if (type == "uchar" || type == "uint8" || type == "char" || type == "int8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  raise(Errc::parse_error, "unsupported PLY property type '" + type + "'");
}

}  // namespace

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::io_error, "cannot open " + path);

  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "ply", Errc::parse_error, path + " is not a PLY file");

  bool binary = false;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        require(fmt == "ascii", Errc::parse_error, "unsupported PLY format '" + fmt + "'");
      }
    } else if (keyword == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex_element = name == "vertex";
      if (in_vertex_element) vertex_count = count;
    } else if (keyword == "property" && in_vertex_element) {
      PlyProperty prop;
      ls >> prop.type >> prop.name;
      require(prop.type != "list", Errc::parse_error, "list properties unsupported on vertex");
      properties.push_back(prop);
    } else if (keyword == "end_header") {
      break;
    }
  }

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, ilabel = -1;
  for (std::size_t i = 0; i < properties.size(); ++i) {
    const std::string& n = properties[i].name;
    if (n == "x") ix = static_cast<int>(i);
    if (n == "y") iy = static_cast<int>(i);
    if (n == "z") iz = static_cast<int>(i);
    if (n == "red") ir = static_cast<int>(i);
    if (n == "green") ig = static_cast<int>(i);
    if (n == "blue") ib = static_cast<int>(i);
    if (n == "instance_id") ilabel = static_cast<int>(i);
  }
  require(ix >= 0 && iy >= 0 && iz >= 0, Errc::parse_error, "PLY lacks x/y/z properties");
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  if (has_color) cloud.colors.reserve(vertex_count);
  if (ilabel >= 0) cloud.labels.reserve(vertex_count);

  if (binary) {
    int stride = 0;
    std::vector<int> offsets(properties.size());
    for (std::size_t i = 0; i < properties.size(); ++i) {
      offsets[i] = stride;
      stride += property_size(properties[i].type);
    }
    std::vector<unsigned char> row(static_cast<std::size_t>(stride));
    for (std::size_t v = 0; v < vertex_count; ++v) {
      in.read(reinterpret_cast<char*>(row.data()), stride);
      require(in.gcount() == stride, Errc::parse_error, "truncated PLY payload");
      auto read_float = [&](int idx) {
        return bits_to_float(get_le32(row.data() + offsets[idx]));
      };
      cloud.points.emplace_back(read_float(ix), read_float(iy), read_float(iz));
      if (has_color) {
        cloud.colors.push_back({row[offsets[ir]], row[offsets[ig]], row[offsets[ib]]});
      }
      if (ilabel >= 0) {
        cloud.labels.push_back(static_cast<std::int32_t>(get_le32(row.data() + offsets[ilabel])));
      }
    }
  } else {
    std::vector<double> values(properties.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (std::size_t i = 0; i < properties.size(); ++i) {
        require(static_cast<bool>(in >> values[i]), Errc::parse_error, "truncated PLY payload");
      }
      cloud.points.emplace_back(values[ix], values[iy], values[iz]);
      if (has_color) {
        cloud.colors.push_back({static_cast<std::uint8_t>(values[ir]),
                                static_cast<std::uint8_t>(values[ig]),
                                static_cast<std::uint8_t>(values[ib])});
      }
      if (ilabel >= 0) cloud.labels.push_back(static_cast<std::int32_t>(values[ilabel]));
    }
  }
  cloud.validate();
  return cloud;
}

void write_ply(const std::string& path, const PointCloud& cloud, bool binary) {
  cloud.validate();
  std::ostringstream header;
  header << "ply\n"
         << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
         << "element vertex " << cloud.points.size() << "\n"
         << "property float x\nproperty float y\nproperty float z\n";
  if (!cloud.colors.empty()) {
    header << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  if (!cloud.labels.empty()) header << "property int instance_id\n";
  header << "end_header\n";

  std::string body;
  if (binary) {
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        put_le32(body, float_to_bits(static_cast<float>(cloud.points[i][a])));
      }
      if (!cloud.colors.empty()) {
        for (int c = 0; c < 3; ++c) body.push_back(static_cast<char>(cloud.colors[i][c]));
      }
      if (!cloud.labels.empty()) {
        put_le32(body, static_cast<std::uint32_t>(cloud.labels[i]));
      }
    }
  } else {
    std::ostringstream text;
    text.precision(9);  // float32 round-trips at 9 significant digits
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      text << static_cast<float>(cloud.points[i].x()) << " "
           << static_cast<float>(cloud.points[i].y()) << " "
           << static_cast<float>(cloud.points[i].z());
      if (!cloud.colors.empty()) {
        text << " " << static_cast<int>(cloud.colors[i][0]) << " "
             << static_cast<int>(cloud.colors[i][1]) << " "
             << static_cast<int>(cloud.colors[i][2]);
      }
      if (!cloud.labels.empty()) text << " " << cloud.labels[i];
      text << "\n";
    }
    body = text.str();
  }
  write_text_file(path, header.str() + body);
}

// ---------------------------------------------------------------------------
// Trajectory + intrinsics CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

CameraTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "frame,timestamp_s,tx,ty,tz,qx,qy,qz,qw", Errc::parse_error,
          "unexpected trajectory header: " + line);

  CameraTrajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    require(f.size() == 9, Errc::parse_error, "bad trajectory row: " + line);
    Pose pose;
    pose.frame_index = std::stoi(f[0]);
    pose.timestamp_s = std::stod(f[1]);
    pose.translation = Vec3(std::stod(f[2]), std::stod(f[3]), std::stod(f[4]));
    pose.rotation =
        Eigen::Quaterniond(std::stod(f[8]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7]));
    require(std::abs(pose.rotation.norm() - 1.0) <= 1e-6, Errc::parse_error,
            "non-unit quaternion at frame " + f[0]);
    pose.rotation.normalize();
    if (!traj.poses.empty()) {
      require(pose.timestamp_s > traj.poses.back().timestamp_s, Errc::parse_error,
              "timestamps must strictly increase at frame " + f[0]);
    }
    traj.poses.push_back(pose);
  }
  return traj;
}

void write_trajectory_csv(const std::string& path, const CameraTrajectory& traj) {
  std::ostringstream out;
  out << "frame,timestamp_s,tx,ty,tz,qx,qy,qz,qw\n";
  out.precision(17);
  for (const Pose& pose : traj.poses) {
    out << pose.frame_index << "," << pose.timestamp_s << "," << pose.translation.x() << ","
        << pose.translation.y() << "," << pose.translation.z() << "," << pose.rotation.x()
        << "," << pose.rotation.y() << "," << pose.rotation.z() << "," << pose.rotation.w()
        << "\n";
  }
  write_text_file(path, out.str());
}

Intrinsics read_intrinsics(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "fx,fy,cx,cy,width,height", Errc::parse_error,
          "unexpected intrinsics header: " + line);
  require(static_cast<bool>(std::getline(in, line)), Errc::parse_error,
          path + " has no data row");
  const std::vector<std::string> f = split_csv(line);
  require(f.size() == 6, Errc::parse_error, "bad intrinsics row: " + line);
  Intrinsics intr;
  intr.fx = std::stod(f[0]);
  intr.fy = std::stod(f[1]);
  intr.cx = std::stod(f[2]);
  intr.cy = std::stod(f[3]);
  intr.width = std::stoi(f[4]);
  intr.height = std::stoi(f[5]);
  intr.validate();
  return intr;
}

void write_intrinsics(const std::string& path, const Intrinsics& intr) {
  std::ostringstream out;
  out.precision(17);
  out << "fx,fy,cx,cy,width,height\n"
      << intr.fx << "," << intr.fy << "," << intr.cx << "," << intr.cy << "," << intr.width
      << "," << intr.height << "\n";
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// JSONL formats
// ---------------------------------------------------------------------------

namespace {

json parse_line(const std::string& line, const std::string& what) {
  json record = json::parse(line, nullptr, false);
  require(!record.is_discarded(), Errc::parse_error, "bad JSON in " + what + ": " + line);
  return record;
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn fn) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    fn(parse_line(line, path));
  }
}

std::string u64_hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<MaskRecord> read_mask_jsonl(const std::string& path) {
  std::vector<MaskRecord> records;
  for_each_jsonl(path, [&](const json& r) {
    MaskRecord rec;
    rec.video_id = r.at("video_id").get<std::string>();
    rec.frame_index = r.at("frame_index").get<int>();
    rec.instance_id = r.at("instance_id").get<int>();
    rec.category = r.value("category", "");
    const auto size = r.at("size");
    rec.mask = rle::from_string(size.at(0).get<int>(), size.at(1).get<int>(),
                                r.at("counts").get<std::string>());
    records.push_back(std::move(rec));
  });
  return records;
}

void write_mask_jsonl(const std::string& path, const std::vector<MaskRecord>& records) {
  std::ostringstream out;
  for (const MaskRecord& rec : records) {
    json r;
    r["video_id"] = rec.video_id;
    r["frame_index"] = rec.frame_index;
    r["instance_id"] = rec.instance_id;
    r["category"] = rec.category;
    r["size"] = {rec.mask.height, rec.mask.width};
    r["counts"] = rle::to_string(rec.mask);
    out << r.dump() << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<MaskRecord> tracks_to_records(const std::string& video_id,
                                          const std::vector<Track>& tracks) {
  std::vector<MaskRecord> records;
  for (const Track& track : tracks) {
    for (const auto& [frame, mask] : track.frames) {
      records.push_back({video_id, frame, track.instance_id, track.category, mask});
    }
  }
  return records;
}

void write_facts_jsonl(const std::string& path, const std::vector<FactRecord>& records) {
  std::ostringstream out;
  for (const FactRecord& rec : records) {
    json r;
    r["scene_id"] = rec.scene_id;
    r["kind"] = fact_kind_name(rec.fact.kind);
    r["operands"] = rec.fact.operands;
    if (rec.fact.anchor_frame) {
      r["anchor_frame"] = *rec.fact.anchor_frame;
    } else {
      r["anchor_frame"] = nullptr;
    }
    if (rec.fact.unit.empty()) {
      r["value"] = rec.fact.label;
      r["unit"] = "";
    } else {
      r["value"] = rec.fact.value;
      r["unit"] = rec.fact.unit;
    }
    r["policy_digest"] = u64_hex(rec.policy_digest);
    out << r.dump() << "\n";
  }
  write_text_file(path, out.str());
}

json qa_to_json(const QaItem& item) {
  json r;
  r["id"] = item.id;
  r["video_id"] = item.video_id;
  r["question"] = item.question;
  r["answer"] = item.answer;
  r["answer_kind"] = answer_kind_name(item.answer_kind);
  r["ability"] = item.ability;
  r["operands"] = item.operands;
  r["masks_ref"] = item.masks_ref;
  if (!item.category.empty()) r["category"] = item.category;
  r["provenance"] = {{"template_id", item.provenance.template_id},
                     {"phrasing_index", item.provenance.phrasing_index},
                     {"fact_ids", item.provenance.fact_ids},
                     {"rng_seed", u64_hex(item.provenance.rng_seed)}};
  return r;
}

QaItem qa_from_json(const json& r) {
  QaItem item;
  item.id = r.at("id").get<std::string>();
  item.video_id = r.value("video_id", "");
  item.question = r.at("question").get<std::string>();
  item.answer = r.at("answer").get<std::string>();
  item.answer_kind = answer_kind_from_name(r.at("answer_kind").get<std::string>());
  item.ability = r.at("ability").get<std::string>();
  if (r.contains("operands")) item.operands = r["operands"].get<std::vector<int>>();
  item.masks_ref = r.value("masks_ref", "");
  item.category = r.value("category", "");
  if (r.contains("provenance")) {
    const json& p = r["provenance"];
    item.provenance.template_id = p.value("template_id", "");
    item.provenance.phrasing_index = p.value("phrasing_index", 0);
    if (p.contains("fact_ids")) {
      item.provenance.fact_ids = p["fact_ids"].get<std::vector<std::string>>();
    }
    if (p.contains("rng_seed")) {
      item.provenance.rng_seed = std::stoull(p["rng_seed"].get<std::string>(), nullptr, 16);
    }
  }
  return item;
}

std::vector<QaItem> read_qa_jsonl(const std::string& path) {
  std::vector<QaItem> items;
  for_each_jsonl(path, [&](const json& r) { items.push_back(qa_from_json(r)); });
  return items;
}

void write_qa_jsonl(const std::string& path, const std::vector<QaItem>& items) {
  std::ostringstream out;
  for (const QaItem& item : items) out << qa_to_json(item).dump() << "\n";
  write_text_file(path, out.str());
}

std::vector<Prediction> read_predictions_jsonl(const std::string& path) {
  std::vector<Prediction> preds;
  for_each_jsonl(path, [&](const json& r) {
    Prediction pred;
    pred.qa_id = r.at("qa_id").get<std::string>();
    pred.kind = answer_kind_from_name(r.at("kind").get<std::string>());
    switch (pred.kind) {
      case AnswerKind::numeric_scale:
      case AnswerKind::numeric_angle:
        pred.value = r.at("value").get<double>();
        break;
      case AnswerKind::segmentation:
        pred.masks_ref = r.at("masks_ref").get<std::string>();
        break;
      default:
        pred.text = r.at("text").get<std::string>();
    }
    preds.push_back(std::move(pred));
  });
  return preds;
}

void write_predictions_jsonl(const std::string& path, const std::vector<Prediction>& preds) {
  std::ostringstream out;
  for (const Prediction& pred : preds) {
    json r;
    r["qa_id"] = pred.qa_id;
    r["kind"] = answer_kind_name(pred.kind);
    switch (pred.kind) {
      case AnswerKind::numeric_scale:
      case AnswerKind::numeric_angle:
        r["value"] = pred.value;
        break;
      case AnswerKind::segmentation:
        r["masks_ref"] = pred.masks_ref;
        break;
      default:
        r["text"] = pred.text;
    }
    out << r.dump() << "\n";
  }
  write_text_file(path, out.str());
}

json report_to_json(const ScoreReport& report) {
  json r;
  json abilities = json::object();
  for (const auto& [ability, score] : report.per_ability) {
    abilities[ability] = {{"count", score.count}, {"mean", score.mean}};
  }
  r["per_ability"] = abilities;
  r["category_mean"] = report.category_mean;
  r["overall_mean"] = report.overall_mean;
  r["overall_item_mean"] = report.overall_item_mean;
  r["scored"] = report.scored;
  r["unscored"] = report.unscored;
  r["unscored_ids"] = report.unscored_ids;
  r["flags"] = report.flags;
  return r;
}

}  // namespace egoqa::io
