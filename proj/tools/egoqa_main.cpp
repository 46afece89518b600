// egoqa: turns egocentric-video reconstructions (point clouds, trajectories,
// instance masks) into spatial/object QA datasets and scores predictions.
// Subcommands: align, fuse, facts, forge, balance, score.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 transport error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "egoqa/balance.hpp"
#include "egoqa/facts.hpp"
#include "egoqa/forge.hpp"
#include "egoqa/fusion.hpp"
#include "egoqa/geometry.hpp"
#include "egoqa/io.hpp"
#include "egoqa/llm.hpp"
#include "egoqa/metrics.hpp"
#include "egoqa/parallel.hpp"

namespace {

using namespace egoqa;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_input_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path)) {
    throw UsageError(what + " file not found: " + path);
  }
}

// Required options may arrive via flags or the config file, so presence is
// checked here rather than through CLI11's required().
void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw UsageError(std::string(flag) + " is required (pass the flag or set it in --config)");
  }
}

std::string u64_hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Options shared by every subcommand.
struct CommonOpts {
  std::uint64_t seed = 0;
  int jobs = 0;
  bool live_llm = false;
  std::string config_path;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--seed", opts.seed, "RNG seed recorded into outputs");
  cmd->add_option("--jobs", opts.jobs, "worker threads (default: logical cores)");
  cmd->add_flag("--live-llm", opts.live_llm, "allow live LLM calls (default: offline)");
  cmd->add_option("--config", opts.config_path, "JSON config supplying defaults");
}

// Fills unset options from a JSON config: top-level keys, overridden by the
// subcommand block when present.
void apply_config(CLI::App* cmd, const CommonOpts& opts) {
  if (opts.config_path.empty()) return;
  require_input_file(opts.config_path, "config");
  json config = json::parse(io::read_text_file(opts.config_path));
  json merged = config;
  if (config.contains(cmd->get_name())) {
    for (auto& [key, value] : config[cmd->get_name()].items()) merged[key] = value;
  }
  for (CLI::Option* opt : cmd->get_options()) {
    if (opt->count() > 0) continue;
    const auto& lnames = opt->get_lnames();
    if (lnames.empty()) continue;
    const std::string& name = lnames.front();
    if (!merged.contains(name)) continue;
    const json& value = merged[name];
    opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

struct AlignOpts {
  CommonOpts common;
  std::string cloud, trajectory, out_cloud, out_trajectory, report;
  RansacParams ransac;
  bool binary_ply = true;
};

int run_align(const AlignOpts& opts) {
  require_flag(opts.cloud, "--cloud");
  require_flag(opts.trajectory, "--trajectory");
  require_flag(opts.out_cloud, "--out-cloud");
  require_flag(opts.out_trajectory, "--out-trajectory");
  require_flag(opts.report, "--report");
  require_input_file(opts.cloud, "cloud");
  require_input_file(opts.trajectory, "trajectory");

  const PointCloud cloud = io::read_ply(opts.cloud);
  const CameraTrajectory traj = io::read_trajectory_csv(opts.trajectory);
  if (traj.poses.empty()) throw UsageError("trajectory has no poses: " + opts.trajectory);

  RansacParams params = opts.ransac;
  params.rng_seed = opts.common.seed;
  const GroundDetection ground = detect_ground(cloud, traj.poses.front(), params);
  const AlignmentResult aligned = gravity_align(cloud, traj, ground.ground);

  io::write_ply(opts.out_cloud, aligned.cloud, opts.binary_ply);
  io::write_trajectory_csv(opts.out_trajectory, aligned.trajectory);

  json report;
  report["seed"] = u64_hex(params.rng_seed);
  report["ground_plane"] = {{"normal", {ground.ground.normal.x(), ground.ground.normal.y(),
                                        ground.ground.normal.z()}},
                            {"d", ground.ground.d},
                            {"inlier_count", ground.ground.inlier_count}};
  report["planes_considered"] = ground.planes_considered;
  report["angle_to_camera_y_deg"] = ground.angle_to_camera_y_deg;
  report["corrected_angle_deg"] = aligned.corrected_angle_deg;
  report["transform_row_major"] = aligned.transform.matrix_row_major();
  io::write_text_file(opts.report, report.dump(2) + "\n");

  std::cout << "align: corrected " << aligned.corrected_angle_deg << " deg using "
            << ground.ground.inlier_count << " ground inliers ("
            << ground.planes_considered << " planes considered)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fuse
// ---------------------------------------------------------------------------

// File-backed tracker: follows an upstream per-frame mask dump. The seed is
// matched to an upstream instance by IoU at the source frame, then the
// instance's mask at the target frame is returned.
class FileTracker : public Tracker {
 public:
  explicit FileTracker(const std::vector<io::MaskRecord>& records) {
    for (const io::MaskRecord& rec : records) {
      frames_[rec.frame_index][rec.instance_id] = rec.mask;
    }
  }

  std::optional<Rle> propagate(const Rle& seed, int from_frame, int to_frame) override {
    auto from_it = frames_.find(from_frame);
    if (from_it == frames_.end()) return std::nullopt;
    int best_id = -1;
    double best_iou = 0.5;  // weaker overlaps do not identify the instance
    for (const auto& [id, mask] : from_it->second) {
      if (!mask.same_size(seed)) continue;
      const double iou = mask_iou(seed, mask);
      if (iou > best_iou) {
        best_iou = iou;
        best_id = id;
      }
    }
    if (best_id < 0) return std::nullopt;
    auto to_it = frames_.find(to_frame);
    if (to_it == frames_.end()) return std::nullopt;
    auto mask_it = to_it->second.find(best_id);
    if (mask_it == to_it->second.end()) return std::nullopt;
    return mask_it->second;
  }

 private:
  std::map<int, std::map<int, Rle>> frames_;
};

struct FuseOpts {
  CommonOpts common;
  std::string detections, tracker_masks, out;
  std::string video_id = "video";
  double fps = 30.0;
  int total_frames = 0;
  int cap = 0;  // 0 = no per-category cap
  FusionParams params;
};

int run_fuse(const FuseOpts& opts) {
  require_flag(opts.detections, "--detections");
  require_flag(opts.tracker_masks, "--tracker-masks");
  require_flag(opts.out, "--out");
  if (opts.total_frames <= 0) throw UsageError("--total-frames must be positive");
  require_input_file(opts.detections, "detections");
  require_input_file(opts.tracker_masks, "tracker masks");

  // Detections JSONL reuses the mask record schema; frame_index marks the
  // key frame.
  std::map<int, DetectionBatch> batches_by_frame;
  for (const io::MaskRecord& rec : io::read_mask_jsonl(opts.detections)) {
    DetectionBatch& batch = batches_by_frame[rec.frame_index];
    batch.key_frame_index = rec.frame_index;
    batch.proposals.emplace_back(rec.category, rec.mask);
  }
  std::vector<DetectionBatch> batches;
  for (auto& [frame, batch] : batches_by_frame) batches.push_back(std::move(batch));

  FileTracker tracker(io::read_mask_jsonl(opts.tracker_masks));
  std::vector<Track> tracks =
      assemble_lifecycles(batches, tracker, opts.fps, opts.total_frames, opts.params);
  if (opts.cap > 0) tracks = cap_per_category(tracks, opts.cap);

  io::write_mask_jsonl(opts.out, io::tracks_to_records(opts.video_id, tracks));
  std::cout << "fuse: " << tracks.size() << " tracks\n";
  for (const Track& track : tracks) {
    std::cout << "  id " << track.instance_id << " (" << track.category << "): frames ["
              << track.first_frame() << ", " << track.last_frame() << "], "
              << track.frames.size() << " masks, " << track.reverse_extended.size()
              << " reverse-extended\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// facts
// ---------------------------------------------------------------------------

struct FactsOpts {
  CommonOpts common;
  std::string cloud, trajectory, out;
  std::string scene_id = "scene";
  int min_points = 1;
  QualitativePolicy policy;
};

std::vector<io::FactRecord> compute_scene_facts(const std::string& scene_id,
                                                const PointCloud& cloud,
                                                const CameraTrajectory& traj,
                                                const QualitativePolicy& policy) {
  const std::vector<InstanceGeometry> instances = split_instances(cloud);
  const Pose& anchor = traj.poses.back();
  const std::uint64_t digest = policy.digest();

  std::vector<io::FactRecord> records;
  auto add = [&](SpatialFact fact) { records.push_back({scene_id, std::move(fact), digest}); };

  {
    SpatialFact fact;
    fact.kind = FactKind::trajectory_length;
    fact.value = trajectory_length(traj);
    fact.unit = "m";
    add(fact);
  }
  for (const InstanceGeometry& inst : instances) {
    SpatialFact dist;
    dist.kind = FactKind::ego_distance;
    dist.operands = {inst.instance_id};
    dist.anchor_frame = anchor.frame_index;
    dist.value = ego_distance(anchor, inst);
    dist.unit = "m";
    add(dist);

    try {
      SpatialFact dir;
      dir.kind = FactKind::ego_direction_cw;
      dir.operands = {inst.instance_id};
      dir.anchor_frame = anchor.frame_index;
      dir.value = ego_direction_cw(anchor, inst);
      dir.unit = "deg";
      add(dir);

      SpatialFact sector;
      sector.kind = FactKind::ego_relative_position;
      sector.operands = {inst.instance_id};
      sector.anchor_frame = anchor.frame_index;
      sector.label = ego_relative_position(anchor, inst, policy);
      add(sector);
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate_bearing) throw;
    }

    if (inst.points.size() >= 20) {
      const SizeDims dims = size_dims(inst);
      SpatialFact height;
      height.kind = FactKind::height_extent;
      height.operands = {inst.instance_id};
      height.value = dims.height;
      height.unit = "m";
      add(height);

      SpatialFact size;
      size.kind = FactKind::size_dims;
      size.operands = {inst.instance_id};
      size.value = dims.width;
      size.unit = "m";
      add(size);
    }
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = i + 1; j < instances.size(); ++j) {
      const InstanceGeometry& a = instances[i];
      const InstanceGeometry& b = instances[j];
      SpatialFact dist;
      dist.kind = FactKind::center_distance;
      dist.operands = {a.instance_id, b.instance_id};
      dist.value = center_distance(a, b);
      dist.unit = "m";
      add(dist);

      SpatialFact elev;
      elev.kind = FactKind::elevation_diff;
      elev.operands = {a.instance_id, b.instance_id};
      elev.value = elevation_diff(a, b);
      elev.unit = "m";
      add(elev);

      SpatialFact rel;
      rel.kind = FactKind::vertical_relation;
      rel.operands = {a.instance_id, b.instance_id};
      rel.label = vertical_relation_name(vertical_relation(a, b, policy));
      add(rel);
    }
  }
  return records;
}

int run_facts(const FactsOpts& opts) {
  require_flag(opts.cloud, "--cloud");
  require_flag(opts.trajectory, "--trajectory");
  require_flag(opts.out, "--out");
  require_input_file(opts.cloud, "cloud");
  require_input_file(opts.trajectory, "trajectory");
  const PointCloud cloud = io::read_ply(opts.cloud);
  const CameraTrajectory traj = io::read_trajectory_csv(opts.trajectory);
  if (traj.poses.empty()) throw UsageError("trajectory has no poses");
  require(cloud.has_labels(), Errc::invalid_argument,
          "facts need a labeled cloud (instance_id property)");

  const auto records = compute_scene_facts(opts.scene_id, cloud, traj, opts.policy);
  io::write_facts_jsonl(opts.out, records);
  std::cout << "facts: " << records.size() << " records for scene " << opts.scene_id << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// forge
// ---------------------------------------------------------------------------

struct ForgeOpts {
  CommonOpts common;
  std::string cloud, trajectory, refs, templates, out, manifest;
  std::string video_id = "video";
  ForgePolicy policy;
};

std::map<int, std::string> load_refs(const std::string& path) {
  json doc = json::parse(io::read_text_file(path));
  std::map<int, std::string> refs;
  for (auto& [key, value] : doc.items()) refs[std::stoi(key)] = value.get<std::string>();
  return refs;
}

Scene load_scene(const std::string& video_id, const std::string& cloud_path,
                 const std::string& traj_path, const std::string& refs_path) {
  Scene scene;
  scene.video_id = video_id;
  const PointCloud cloud = io::read_ply(cloud_path);
  require(cloud.has_labels(), Errc::invalid_argument,
          "forge needs a labeled cloud (instance_id property)");
  scene.instances = split_instances(cloud);
  scene.trajectory = io::read_trajectory_csv(traj_path);
  scene.refs = load_refs(refs_path);
  return scene;
}

int run_forge(const ForgeOpts& opts) {
  require_flag(opts.templates, "--templates");
  require_flag(opts.out, "--out");
  if (opts.manifest.empty()) {
    require_flag(opts.cloud, "--cloud");
    require_flag(opts.trajectory, "--trajectory");
    require_flag(opts.refs, "--refs");
  }
  require_input_file(opts.templates, "templates");
  const TemplateRegistry registry = TemplateRegistry::load(opts.templates);

  ForgePolicy policy = opts.policy;
  policy.seed = opts.common.seed;

  struct SceneSpec {
    std::string video_id, cloud, trajectory, refs;
  };
  std::vector<SceneSpec> specs;
  if (!opts.manifest.empty()) {
    require_input_file(opts.manifest, "manifest");
    json doc = json::parse(io::read_text_file(opts.manifest));
    for (const json& s : doc.at("scenes")) {
      specs.push_back({s.at("video_id").get<std::string>(), s.at("cloud").get<std::string>(),
                       s.at("trajectory").get<std::string>(), s.at("refs").get<std::string>()});
    }
    // Output order is by scene id no matter how workers finish.
    std::sort(specs.begin(), specs.end(),
              [](const SceneSpec& a, const SceneSpec& b) { return a.video_id < b.video_id; });
  } else {
    specs.push_back({opts.video_id, opts.cloud, opts.trajectory, opts.refs});
  }
  for (const SceneSpec& spec : specs) {
    require_input_file(spec.cloud, "cloud");
    require_input_file(spec.trajectory, "trajectory");
    require_input_file(spec.refs, "refs");
  }

  std::vector<std::vector<QaItem>> per_scene(specs.size());
  std::exception_ptr failure;
  const std::int64_t n = static_cast<std::int64_t>(specs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const SceneSpec& spec = specs[static_cast<std::size_t>(i)];
      const Scene scene = load_scene(spec.video_id, spec.cloud, spec.trajectory, spec.refs);
      per_scene[static_cast<std::size_t>(i)] = forge_scene(scene, registry, policy);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<QaItem> items;
  for (std::vector<QaItem>& scene_items : per_scene) {
    items.insert(items.end(), scene_items.begin(), scene_items.end());
  }
  Rng downsample_rng(Rng::derive(policy.seed, Rng::hash_str("counting_downsample")));
  items = counting_downsample(items, downsample_rng);

  if (items.empty()) {
    std::cerr << "forge: all candidates filtered; no QA items produced\n";
    return 2;
  }
  io::write_qa_jsonl(opts.out, items);

  std::map<std::string, int> per_ability;
  for (const QaItem& item : items) ++per_ability[item.ability];
  std::cout << "forge: " << items.size() << " items (seed " << u64_hex(policy.seed) << ")\n";
  for (const auto& [ability, count] : per_ability) {
    std::cout << "  " << ability << ": " << count << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// balance
// ---------------------------------------------------------------------------

struct BalanceOpts {
  CommonOpts common;
  std::string pool, taxonomy, frequencies, out, deficit_report;
  int target = 10000;
  bool no_counting_downsample = false;
};

int run_balance(const BalanceOpts& opts) {
  require_flag(opts.pool, "--pool");
  require_flag(opts.frequencies, "--frequencies");
  require_flag(opts.out, "--out");
  require_flag(opts.deficit_report, "--deficit-report");
  require_input_file(opts.pool, "pool");
  require_input_file(opts.frequencies, "frequency table");

  std::vector<QaItem> pool = io::read_qa_jsonl(opts.pool);
  const std::size_t pool_before = pool.size();
  if (!opts.no_counting_downsample) {
    Rng rng(Rng::derive(opts.common.seed, Rng::hash_str("counting_downsample")));
    pool = counting_downsample(pool, rng);
  }

  if (!opts.taxonomy.empty()) {
    // Normalizes labels onto the taxonomy; unknown classes become "other".
    require_input_file(opts.taxonomy, "taxonomy");
    const Taxonomy taxonomy = Taxonomy::load(opts.taxonomy);
    for (QaItem& item : pool) {
      if (!item.category.empty() && !taxonomy.fine_to_coarse.count(item.category)) {
        item.category = "other";
      }
    }
  }

  const FrequencyTable freq = FrequencyTable::load(opts.frequencies);
  const std::map<std::string, int> targets = estimate_targets(freq, opts.target);
  const SampleResult result = stratified_sample(pool, targets, opts.common.seed);
  io::write_qa_jsonl(opts.out, result.items);

  json report;
  report["seed"] = u64_hex(opts.common.seed);
  report["pool_size"] = pool_before;
  report["pool_after_counting_downsample"] = pool.size();
  report["target_total"] = opts.target;
  report["selected"] = result.total_selected;
  report["total_deficit"] = result.total_deficit;
  json classes = json::object();
  for (const auto& [name, entry] : result.report) {
    if (entry.deficit == 0) continue;
    classes[name] = {{"target", entry.target},
                     {"available", entry.available},
                     {"selected", entry.selected},
                     {"deficit", entry.deficit}};
  }
  report["deficits"] = classes;
  io::write_text_file(opts.deficit_report, report.dump(2) + "\n");

  std::cout << "balance: " << result.total_selected << " of " << opts.target
            << " target items selected, deficit " << result.total_deficit << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

class GatewayJudge : public Judge {
 public:
  GatewayJudge(Gateway& gateway, std::string model)
      : gateway_(gateway), model_(std::move(model)) {}

  std::string ask(const std::string& question, const std::string& ground_truth,
                  const std::string& prediction, bool binary) override {
    PromptInputs inputs;
    inputs.model = model_;
    inputs.question = question;
    inputs.ground_truth = ground_truth;
    inputs.prediction = prediction;
    ChatRequest request =
        build_prompt(binary ? PromptKind::judge_binary : PromptKind::judge_open, inputs);
    try {
      return gateway_.chat(request);
    } catch (const Error& e) {
      if (e.code() == Errc::transport_exhausted) {
        raise(Errc::judge_unavailable, e.what());
      }
      throw;
    }
  }

 private:
  Gateway& gateway_;
  std::string model_;
};

struct ScoreOpts {
  CommonOpts common;
  std::string qa, predictions, out, fixtures, masks_root;
};

// masks_ref format: <mask-jsonl-path>:<instance_id>; relative paths resolve
// against --masks-root.
std::map<int, Rle> load_mask_track(const std::string& ref, const std::string& root) {
  const std::size_t colon = ref.rfind(':');
  require(colon != std::string::npos, Errc::parse_error,
          "masks_ref must be <path>:<instance_id>, got '" + ref + "'");
  std::string path = ref.substr(0, colon);
  const int instance_id = std::stoi(ref.substr(colon + 1));
  if (!root.empty() && !std::filesystem::path(path).is_absolute()) {
    path = (std::filesystem::path(root) / path).string();
  }
  std::map<int, Rle> track;
  for (const io::MaskRecord& rec : io::read_mask_jsonl(path)) {
    if (rec.instance_id == instance_id) track[rec.frame_index] = rec.mask;
  }
  return track;
}

std::vector<FramePair> align_mask_tracks(const std::map<int, Rle>& pred,
                                         const std::map<int, Rle>& gt) {
  std::set<int> frames;
  for (const auto& [f, m] : pred) frames.insert(f);
  for (const auto& [f, m] : gt) frames.insert(f);
  std::vector<FramePair> pairs;
  for (int f : frames) {
    FramePair pair;
    auto p = pred.find(f);
    if (p != pred.end()) pair.pred = p->second;
    auto g = gt.find(f);
    if (g != gt.end()) pair.gt = g->second;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

int run_score(const ScoreOpts& opts) {
  require_flag(opts.qa, "--qa");
  require_flag(opts.predictions, "--predictions");
  require_flag(opts.out, "--out");
  require_input_file(opts.qa, "qa");
  require_input_file(opts.predictions, "predictions");

  const std::vector<QaItem> items = io::read_qa_jsonl(opts.qa);
  std::map<std::string, Prediction> predictions;
  for (Prediction& pred : io::read_predictions_jsonl(opts.predictions)) {
    predictions[pred.qa_id] = std::move(pred);
  }

  std::unique_ptr<Transport> transport;
  if (!opts.fixtures.empty()) {
    require_input_file(opts.fixtures, "fixtures");
    transport = std::make_unique<MockTransport>(MockTransport::load(opts.fixtures));
  } else if (opts.common.live_llm) {
    const char* endpoint = std::getenv("EGOQA_LLM_ENDPOINT");
    const char* api_key = std::getenv("EGOQA_LLM_API_KEY");
    if (!endpoint) throw UsageError("--live-llm needs EGOQA_LLM_ENDPOINT");
    transport = make_http_transport(endpoint, api_key ? api_key : "");
  }
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<GatewayJudge> judge;
  if (transport) {
    gateway = std::make_unique<Gateway>(
        *transport, opts.common.live_llm
                        ? Gateway::SleepFn([](double s) {
                            std::this_thread::sleep_for(std::chrono::duration<double>(s));
                          })
                        : Gateway::SleepFn(nullptr));
    const char* model = std::getenv("EGOQA_LLM_MODEL");
    judge = std::make_unique<GatewayJudge>(*gateway, model ? model : "default");
  }

  std::vector<ScoredItem> scored;
  std::vector<std::string> unscored;
  for (const QaItem& item : items) {
    auto pred_it = predictions.find(item.id);
    if (pred_it == predictions.end()) {
      unscored.push_back(item.id);
      continue;
    }
    try {
      double score = 0.0;
      if (item.answer_kind == AnswerKind::segmentation) {
        const auto pred_track = load_mask_track(pred_it->second.masks_ref, opts.masks_root);
        const auto gt_track = load_mask_track(item.masks_ref, opts.masks_root);
        const auto pairs = align_mask_tracks(pred_track, gt_track);
        score = score_item(item, pred_it->second, judge.get(), &pairs);
      } else {
        score = score_item(item, pred_it->second, judge.get());
      }
      scored.push_back({item.id, item.ability, score});
    } catch (const Error& e) {
      if (e.code() == Errc::judge_unavailable || e.code() == Errc::malformed_response ||
          e.code() == Errc::transport_exhausted) {
        unscored.push_back(item.id);
      } else {
        throw;
      }
    }
  }

  const ScoreReport report = aggregate(scored, unscored);
  json out = io::report_to_json(report);
  out["seed"] = u64_hex(opts.common.seed);
  io::write_text_file(opts.out, out.dump(2) + "\n");

  std::cout << "score: " << report.scored << " scored, " << report.unscored
            << " unscored; overall mean " << report.overall_mean << "\n";
  return report.unscored > 0 ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egocentric spatial/object QA dataset toolkit"};
  app.require_subcommand(1);

  AlignOpts align_opts;
  CLI::App* align_cmd = app.add_subcommand("align", "gravity-align a cloud and trajectory");
  add_common(align_cmd, align_opts.common);
  align_cmd->add_option("--cloud", align_opts.cloud, "input PLY");
  align_cmd->add_option("--trajectory", align_opts.trajectory, "input trajectory CSV");
  align_cmd->add_option("--out-cloud", align_opts.out_cloud, "aligned PLY");
  align_cmd->add_option("--out-trajectory", align_opts.out_trajectory, "aligned CSV");
  align_cmd->add_option("--report", align_opts.report, "alignment report JSON");
  align_cmd->add_option("--iterations", align_opts.ransac.iterations_per_plane,
                        "RANSAC iterations per plane");
  align_cmd->add_option("--threshold", align_opts.ransac.inlier_threshold,
                        "inlier distance threshold (m)");
  align_cmd->add_option("--min-inliers", align_opts.ransac.min_inliers, "inlier floor");
  align_cmd->add_flag("!--ascii-ply", align_opts.binary_ply, "write ascii PLY output");

  FuseOpts fuse_opts;
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "fuse detections into lifecycle tracks");
  add_common(fuse_cmd, fuse_opts.common);
  fuse_cmd->add_option("--detections", fuse_opts.detections, "key-frame detections JSONL");
  fuse_cmd->add_option("--tracker-masks", fuse_opts.tracker_masks,
                       "upstream per-frame mask JSONL");
  fuse_cmd->add_option("--out", fuse_opts.out, "fused mask JSONL");
  fuse_cmd->add_option("--video-id", fuse_opts.video_id, "video id for output records");
  fuse_cmd->add_option("--fps", fuse_opts.fps, "source frame rate");
  fuse_cmd->add_option("--total-frames", fuse_opts.total_frames, "video length in frames");
  fuse_cmd->add_option("--iou", fuse_opts.params.iou_threshold, "merge IoU threshold");
  fuse_cmd->add_option("--window", fuse_opts.params.reverse_window_seconds,
                       "reverse tracking window (s)");
  fuse_cmd->add_option("--cap", fuse_opts.cap, "per-category track cap (0 = off)");

  FactsOpts facts_opts;
  CLI::App* facts_cmd = app.add_subcommand("facts", "compute spatial facts for a scene");
  add_common(facts_cmd, facts_opts.common);
  facts_cmd->add_option("--cloud", facts_opts.cloud, "aligned labeled PLY");
  facts_cmd->add_option("--trajectory", facts_opts.trajectory, "aligned trajectory CSV");
  facts_cmd->add_option("--out", facts_opts.out, "facts JSONL");
  facts_cmd->add_option("--scene-id", facts_opts.scene_id, "scene id for output records");

  ForgeOpts forge_opts;
  CLI::App* forge_cmd = app.add_subcommand("forge", "forge QA items from aligned scenes");
  add_common(forge_cmd, forge_opts.common);
  forge_cmd->add_option("--cloud", forge_opts.cloud, "aligned labeled PLY");
  forge_cmd->add_option("--trajectory", forge_opts.trajectory, "aligned trajectory CSV");
  forge_cmd->add_option("--refs", forge_opts.refs, "referring expressions JSON");
  forge_cmd->add_option("--video-id", forge_opts.video_id, "video id");
  forge_cmd->add_option("--manifest", forge_opts.manifest, "multi-scene manifest JSON");
  forge_cmd->add_option("--templates", forge_opts.templates, "template registry JSON");
  forge_cmd->add_option("--out", forge_opts.out, "QA JSONL");
  forge_cmd->add_option("--quota", forge_opts.policy.per_ability_quota, "items per ability");
  forge_cmd->add_option("--margin", forge_opts.policy.comparative_margin,
                        "relative margin for comparative questions");

  BalanceOpts balance_opts;
  CLI::App* balance_cmd = app.add_subcommand("balance", "frequency-balanced downsampling");
  add_common(balance_cmd, balance_opts.common);
  balance_cmd->add_option("--pool", balance_opts.pool, "QA pool JSONL");
  balance_cmd->add_option("--taxonomy", balance_opts.taxonomy, "taxonomy file");
  balance_cmd->add_option("--frequencies", balance_opts.frequencies, "frequency CSV");
  balance_cmd->add_option("--target", balance_opts.target, "target item count");
  balance_cmd->add_option("--out", balance_opts.out, "balanced QA JSONL");
  balance_cmd->add_option("--deficit-report", balance_opts.deficit_report,
                          "deficit report JSON");
  balance_cmd->add_flag("--no-counting-downsample", balance_opts.no_counting_downsample,
                        "skip halving counting answers 1 and 2");

  ScoreOpts score_opts;
  CLI::App* score_cmd = app.add_subcommand("score", "score predictions against a QA file");
  add_common(score_cmd, score_opts.common);
  score_cmd->add_option("--qa", score_opts.qa, "QA JSONL");
  score_cmd->add_option("--predictions", score_opts.predictions, "predictions JSONL");
  score_cmd->add_option("--out", score_opts.out, "score report JSON");
  score_cmd->add_option("--fixtures", score_opts.fixtures, "judge fixture JSONL (offline)");
  score_cmd->add_option("--masks-root", score_opts.masks_root,
                        "base directory for masks_ref paths");

  try {
    app.parse(argc, argv);
    CommonOpts* common = nullptr;
    CLI::App* active = nullptr;
    if (align_cmd->parsed()) { common = &align_opts.common; active = align_cmd; }
    if (fuse_cmd->parsed()) { common = &fuse_opts.common; active = fuse_cmd; }
    if (facts_cmd->parsed()) { common = &facts_opts.common; active = facts_cmd; }
    if (forge_cmd->parsed()) { common = &forge_opts.common; active = forge_cmd; }
    if (balance_cmd->parsed()) { common = &balance_opts.common; active = balance_cmd; }
    if (score_cmd->parsed()) { common = &score_opts.common; active = score_cmd; }
    apply_config(active, *common);
    if (common->jobs > 0) set_threads(common->jobs);

    if (align_cmd->parsed()) return run_align(align_opts);
    if (fuse_cmd->parsed()) return run_fuse(fuse_opts);
    if (facts_cmd->parsed()) return run_facts(facts_opts);
    if (forge_cmd->parsed()) return run_forge(forge_opts);
    if (balance_cmd->parsed()) return run_balance(balance_opts);
    if (score_cmd->parsed()) return run_score(score_opts);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_transport_error(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
