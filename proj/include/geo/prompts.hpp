#pragma once

// Role prompt templates for the remote agents. Placeholders {DSL},
// {DIFF_JSON}, {SKELETON_JSON} and {TEXT} are substituted at request time.
// Templates carry a version tag and can be replaced from a directory of
// <role>.txt files.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "geo/error.hpp"

namespace geo {

enum class Role { Extract, Verify, Generate, Refine, Judge };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::Extract: return "extract";
    case Role::Verify: return "verify";
    case Role::Generate: return "generate";
    case Role::Refine: return "refine";
    default: return "judge";
  }
}

namespace prompt_text {

inline constexpr const char* kGrammar = R"(Figure language, one statement per line:
  canvas W H                                  (first line, integers)
  defaults width R color R G B dash solid|dashed   (optional, before any shape)
  style width R color R G B dash solid|dashed      (applies to later lines)
  point ID x y
  segment ID (x1,y1) (x2,y2)
  circle ID (cx,cy) r
  arc ID (cx,cy) r start_deg end_deg
  polyline ID (x1,y1) (x2,y2) ...
  label ID "text" (ax,ay) (dx,dy)
  rightangle ID (vx,vy) arm1_deg arm2_deg size
  tick ID (mx,my) direction_deg
Coordinates are pixels, origin top-left, y down.)";

inline constexpr const char* kExtract = R"(You read the statement text of a geometry figure and list the relations it asserts.
Known entities (ids and coordinates):
{SKELETON_JSON}
Statement text:
{TEXT}
Reply with a JSON array only. Each element: {"kind": one of parallel, perpendicular, midpoint, incidence, tangent, collinear, equal_length, "operands": [ids from the entity list]}.)";

inline constexpr const char* kVerify = R"(The attached image is a geometry figure. Candidate keypoints detected in it:
{SKELETON_JSON}
Keep only points that sit on a real vertex, intersection or endpoint of the drawing.
Reply with a JSON array of the indices (0-based) to keep, nothing else.)";

inline constexpr const char* kGenerate = R"(Write a program that redraws the attached geometry figure exactly.
{DSL}
Detected structure (anchors in pixels, fitted segments and circles, relations):
{SKELETON_JSON}
Statement text, if any:
{TEXT}
Reply with the program in a single fenced code block.)";

inline constexpr const char* kRefine = R"(The first image is the target figure; the second marks where the current drawing disagrees with it
(red: ink missing from the drawing, blue: extra ink, magenta: displaced, orange: wrong stroke width).
{DSL}
Current program:
```
{PROGRAM}
```
Error regions, each tied to the nearest statement id:
{DIFF_JSON}
Detected structure:
{SKELETON_JSON}
Return the corrected full program in a single fenced code block. Keep ids of statements you do not change.)";

inline constexpr const char* kJudge = R"(Compare the two attached figures: the first is the reference, the second a reconstruction.
Score each criterion from 0 to 100:
  structural_consistency: the same elements connected the same way
  point_positioning: vertices and intersections at the same places
  segment_arc_precision: lengths, radii and curvature agree
  layout: overall placement and proportions agree
Reply with one JSON object with exactly those four integer fields.)";

}  // namespace prompt_text

struct PromptTemplates {
  std::string version = "v1";
  std::map<Role, std::string> text{{Role::Extract, prompt_text::kExtract},
                                   {Role::Verify, prompt_text::kVerify},
                                   {Role::Generate, prompt_text::kGenerate},
                                   {Role::Refine, prompt_text::kRefine},
                                   {Role::Judge, prompt_text::kJudge}};

  // Overrides any role that has a <role>.txt in `dir`; a VERSION file, when
  // present, replaces the version tag.
  static PromptTemplates from_directory(const std::filesystem::path& dir) {
    PromptTemplates t;
    auto slurp = [](const std::filesystem::path& p) {
      std::ifstream in(p, std::ios::binary);
      if (!in) throw IoFailure("cannot read prompt template " + p.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    if (!std::filesystem::is_directory(dir)) throw IoFailure("prompt directory not found: " + dir.string());
    for (Role r : {Role::Extract, Role::Verify, Role::Generate, Role::Refine, Role::Judge}) {
      const auto p = dir / (std::string(to_string(r)) + ".txt");
      if (std::filesystem::exists(p)) t.text[r] = slurp(p);
    }
    if (std::filesystem::exists(dir / "VERSION")) {
      t.version = slurp(dir / "VERSION");
      while (!t.version.empty() && std::isspace(static_cast<unsigned char>(t.version.back()))) t.version.pop_back();
    }
    return t;
  }
};

// Replaces every {KEY} whose KEY is in `values`; other braces are left alone
// so JSON examples inside a template survive.
inline std::string fill_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string::npos) {
        const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace geo
