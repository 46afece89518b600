#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "egoqa/facts.hpp"
#include "egoqa/fusion.hpp"
#include "egoqa/rng.hpp"

namespace egoqa {

enum class AnswerKind { numeric_scale, numeric_angle, closed_text, open_text, segmentation };

const char* answer_kind_name(AnswerKind kind) noexcept;
AnswerKind answer_kind_from_name(const std::string& name);

enum class TemplateVariant { quantitative, qualitative };

// One question family: an ability tag plus >= 3 interchangeable phrasings
// with [A]/[B]/[C] operand slots.
struct Template {
  std::string id;
  std::string ability;
  TemplateVariant variant = TemplateVariant::quantitative;
  AnswerKind answer_kind = AnswerKind::numeric_scale;
  int operand_count = 0;
  std::vector<std::string> phrasings;
};

// Loaded template registry; order follows the file.
struct TemplateRegistry {
  std::vector<Template> templates;

  const Template* find(const std::string& id) const;
  static TemplateRegistry load(const std::string& path);
  static TemplateRegistry parse(const std::string& json_text);
};

struct Provenance {
  std::string template_id;
  int phrasing_index = 0;
  std::vector<std::string> fact_ids;
  std::uint64_t rng_seed = 0;
};

struct QaItem {
  std::string id;
  std::string video_id;
  std::string question;
  std::string answer;  // canonical: "1.24 m", "90 deg", label, or free text
  AnswerKind answer_kind = AnswerKind::closed_text;
  std::string ability;
  std::vector<int> operands;
  std::string masks_ref;  // optional pointer into a mask JSONL
  std::string category;   // optional fine class, used by the balancer
  Provenance provenance;
};

enum class CueMode { crop, highlight };

struct CueFrame {
  int frame_index = 0;
  CueMode mode = CueMode::crop;
};

// Eight frames, one per lifespan octile; first four render as mask crops,
// last four as box-highlight images.
struct CueFrameSet {
  int instance_id = 0;
  std::array<CueFrame, 8> frames;
};

// Picks, per chronological octile of the track, the frame maximizing
// area_fraction - 0.5 * (mask-centroid distance to image center / half
// diagonal); ties go to the earliest frame. Requires >= 8 frames
// (Errc::too_short_track).
CueFrameSet select_cue_frames(const Track& track, int frame_width, int frame_height);

// Canonical answer formatting: meters to 2 decimals, degrees to the nearest
// integer wrapped into [0, 360).
std::string format_meters(double value);
std::string format_degrees(double value);

// Fills one template phrasing from a computed fact. Throws
// Errc::missing_slot / Errc::missing_referring_expression.
QaItem instantiate(const Template& tmpl, int phrasing_index,
                   const std::vector<SpatialFact>& facts,
                   const std::map<int, std::string>& refs,
                   std::uint64_t provenance_seed);

// Everything the forge needs for one video, gravity-aligned.
struct Scene {
  std::string video_id;
  CameraTrajectory trajectory;
  std::vector<InstanceGeometry> instances;
  std::map<int, std::string> refs;  // instance id -> referring expression
};

struct ForgePolicy {
  int per_ability_quota = 3;
  double comparative_margin = 0.10;   // drop near-tie comparative candidates
  double min_scale_answer_m = 0.005;  // reject scale answers that round to 0.00
  QualitativePolicy qualitative;
  std::uint64_t seed = 0;
};

// Enumerates candidates per template, applies the ambiguity filters, and
// instantiates up to the per-ability quota with seeded sampling. The output
// is a deterministic function of (scene, registry, policy).
std::vector<QaItem> forge_scene(const Scene& scene, const TemplateRegistry& registry,
                                const ForgePolicy& policy);

// Halves counting items whose numeric answer is 1 or 2 (per answer value:
// seeded shuffle, keep even positions). Everything else passes through;
// output preserves input order.
std::vector<QaItem> counting_downsample(const std::vector<QaItem>& items, Rng& rng);

}  // namespace egoqa
