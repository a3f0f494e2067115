#pragma once

// Geometry DSL: the executable program a figure is reconstructed into.
//
// A program is a canvas plus an ordered list of primitives. Statement order is
// draw order. Named points are resolved to coordinates while parsing, so a
// Program only ever holds concrete values.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geo/error.hpp"

namespace geo {

struct Point2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2D&, const Point2D&) = default;

  Point2D operator+(Point2D o) const { return {x + o.x, y + o.y}; }
  Point2D operator-(Point2D o) const { return {x - o.x, y - o.y}; }
  Point2D operator*(double s) const { return {x * s, y * s}; }

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(Point2D a, Point2D b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class Dash { Solid, Dashed };

struct Style {
  double stroke_width = 2.0;
  Rgb color{};
  Dash dash = Dash::Solid;

  friend bool operator==(const Style&, const Style&) = default;

  static constexpr double kMinWidth = 0.5;
  static constexpr double kMaxWidth = 20.0;
};

struct PointMark {
  Point2D pos;
  friend bool operator==(const PointMark&, const PointMark&) = default;
};

struct Segment {
  Point2D p1;
  Point2D p2;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Circle {
  Point2D center;
  double radius = 0.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

// Angles in degrees, counter-clockwise as seen on screen (y axis points down),
// swept from start_deg to end_deg.
struct Arc {
  Point2D center;
  double radius = 0.0;
  double start_deg = 0.0;
  double end_deg = 0.0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

struct Polyline {
  std::vector<Point2D> points;
  friend bool operator==(const Polyline&, const Polyline&) = default;
};

struct Label {
  std::string text;
  Point2D anchor;
  Point2D offset;
  friend bool operator==(const Label&, const Label&) = default;
};

struct RightAngleMark {
  Point2D vertex;
  double arm1_deg = 0.0;
  double arm2_deg = 90.0;
  double size = 12.0;
  friend bool operator==(const RightAngleMark&, const RightAngleMark&) = default;
};

struct TickMark {
  Point2D midpoint;
  double direction_deg = 0.0;
  friend bool operator==(const TickMark&, const TickMark&) = default;

  static constexpr double kLength = 12.0;
};

using Shape =
    std::variant<PointMark, Segment, Circle, Arc, Polyline, Label, RightAngleMark, TickMark>;

struct Primitive {
  std::string id;
  Shape shape;
  Style style;

  friend bool operator==(const Primitive&, const Primitive&) = default;
};

struct Program {
  static constexpr int kDefaultCanvas = 1000;

  int width = kDefaultCanvas;
  int height = kDefaultCanvas;
  std::vector<Primitive> primitives;
  Style defaults{};

  friend bool operator==(const Program&, const Program&) = default;

  const Primitive* find(std::string_view id) const {
    for (const auto& p : primitives)
      if (p.id == id) return &p;
    return nullptr;
  }
  Primitive* find(std::string_view id) {
    for (auto& p : primitives)
      if (p.id == id) return &p;
    return nullptr;
  }
};

inline double normalize_degrees(double deg) {
  if (!std::isfinite(deg)) return deg;
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r = 0.0;
  return r == 0.0 ? 0.0 : r;  // folds -0
}

inline const char* shape_keyword(const Shape& s) {
  static constexpr const char* names[] = {"point",    "segment", "circle",     "arc",
                                          "polyline", "label",   "rightangle", "tick"};
  return names[s.index()];
}

// Every coordinate-valued control point of a shape, in declaration order.
inline std::vector<Point2D> control_points(const Shape& shape) {
  return std::visit(
      [](const auto& s) -> std::vector<Point2D> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PointMark>) return {s.pos};
        else if constexpr (std::is_same_v<T, Segment>) return {s.p1, s.p2};
        else if constexpr (std::is_same_v<T, Circle>) return {s.center};
        else if constexpr (std::is_same_v<T, Arc>) return {s.center};
        else if constexpr (std::is_same_v<T, Polyline>) return s.points;
        else if constexpr (std::is_same_v<T, Label>) return {s.anchor};
        else if constexpr (std::is_same_v<T, RightAngleMark>) return {s.vertex};
        else return {s.midpoint};
      },
      shape);
}

// Pointer access to the control points, same order as control_points().
inline std::vector<Point2D*> control_point_refs(Shape& shape) {
  return std::visit(
      [](auto& s) -> std::vector<Point2D*> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PointMark>) return {&s.pos};
        else if constexpr (std::is_same_v<T, Segment>) return {&s.p1, &s.p2};
        else if constexpr (std::is_same_v<T, Circle>) return {&s.center};
        else if constexpr (std::is_same_v<T, Arc>) return {&s.center};
        else if constexpr (std::is_same_v<T, Polyline>) {
          std::vector<Point2D*> out;
          for (auto& p : s.points) out.push_back(&p);
          return out;
        } else if constexpr (std::is_same_v<T, Label>) return {&s.anchor};
        else if constexpr (std::is_same_v<T, RightAngleMark>) return {&s.vertex};
        else return {&s.midpoint};
      },
      shape);
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind { InvariantBreach, Degenerate };

  Kind kind;
  std::string primitive_id;
  std::string reason;

  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline void check_style(const Primitive& p, std::vector<Violation>& out) {
  const double w = p.style.stroke_width;
  if (!(w >= Style::kMinWidth && w <= Style::kMaxWidth))
    out.push_back({Violation::Kind::InvariantBreach, p.id, "stroke_width in [0.5, 20]"});
}

inline bool angle_ok(double deg) { return std::isfinite(deg) && deg >= 0.0 && deg < 360.0; }

}  // namespace detail

// Empty iff every type invariant holds and nothing is fully degenerate.
inline std::vector<Violation> validate_consistency(const Program& p) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  if (p.width < 1 || p.height < 1) out.push_back({K::InvariantBreach, "", "canvas >= 1x1"});

  const double lo_x = -0.1 * p.width, hi_x = 1.1 * p.width;
  const double lo_y = -0.1 * p.height, hi_y = 1.1 * p.height;

  std::set<std::string> seen;
  for (const auto& prim : p.primitives) {
    if (prim.id.empty()) out.push_back({K::InvariantBreach, prim.id, "id nonempty"});
    if (!seen.insert(prim.id).second) out.push_back({K::InvariantBreach, prim.id, "unique id"});
    detail::check_style(prim, out);

    bool finite = true;
    bool in_range = true;
    for (const auto& pt : control_points(prim.shape)) {
      if (!pt.finite()) finite = false;
      else if (pt.x < lo_x || pt.x > hi_x || pt.y < lo_y || pt.y > hi_y) in_range = false;
    }
    if (!finite) {
      out.push_back({K::InvariantBreach, prim.id, "finite coordinates"});
      continue;
    }
    if (!in_range && !std::holds_alternative<Label>(prim.shape))
      out.push_back({K::InvariantBreach, prim.id, "coordinates within canvas overshoot"});

    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Segment>) {
            if (s.p1 == s.p2) out.push_back({K::Degenerate, prim.id, "zero length"});
          } else if constexpr (std::is_same_v<T, Circle>) {
            if (!std::isfinite(s.radius) || s.radius < 0)
              out.push_back({K::InvariantBreach, prim.id, "radius > 0"});
            else if (s.radius == 0)
              out.push_back({K::Degenerate, prim.id, "zero radius"});
          } else if constexpr (std::is_same_v<T, Arc>) {
            if (!std::isfinite(s.radius) || s.radius < 0)
              out.push_back({K::InvariantBreach, prim.id, "radius > 0"});
            else if (s.radius == 0)
              out.push_back({K::Degenerate, prim.id, "zero radius"});
            if (!detail::angle_ok(s.start_deg) || !detail::angle_ok(s.end_deg))
              out.push_back({K::InvariantBreach, prim.id, "angles in [0, 360)"});
            else if (s.start_deg == s.end_deg)
              out.push_back({K::Degenerate, prim.id, "zero sweep"});
          } else if constexpr (std::is_same_v<T, Polyline>) {
            if (s.points.size() < 2)
              out.push_back({K::InvariantBreach, prim.id, "polyline has >= 2 points"});
            else if (std::all_of(s.points.begin(), s.points.end(),
                                 [&](const Point2D& q) { return q == s.points.front(); }))
              out.push_back({K::Degenerate, prim.id, "zero length"});
          } else if constexpr (std::is_same_v<T, Label>) {
            if (s.text.empty()) out.push_back({K::Degenerate, prim.id, "empty text"});
            if (!s.offset.finite())
              out.push_back({K::InvariantBreach, prim.id, "finite coordinates"});
          } else if constexpr (std::is_same_v<T, RightAngleMark>) {
            if (!detail::angle_ok(s.arm1_deg) || !detail::angle_ok(s.arm2_deg))
              out.push_back({K::InvariantBreach, prim.id, "angles in [0, 360)"});
            if (!(s.size > 0)) out.push_back({K::InvariantBreach, prim.id, "size > 0"});
          } else if constexpr (std::is_same_v<T, TickMark>) {
            if (!detail::angle_ok(s.direction_deg))
              out.push_back({K::InvariantBreach, prim.id, "angles in [0, 360)"});
          }
        },
        prim.shape);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  if (s == "-0.00") s = "0.00";
  return s;
}

inline std::string fmt_point(Point2D p) { return "(" + fmt2(p.x) + "," + fmt2(p.y) + ")"; }

inline std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  out += '"';
  return out;
}

inline std::string style_line(const char* keyword, const Style& s) {
  return std::string(keyword) + " width " + fmt2(s.stroke_width) + " color " +
         std::to_string(s.color.r) + " " + std::to_string(s.color.g) + " " +
         std::to_string(s.color.b) + " dash " + (s.dash == Dash::Solid ? "solid" : "dashed");
}

inline std::string statement(const Primitive& p) {
  return std::visit(
      [&](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        std::string head = std::string(shape_keyword(p.shape)) + " " + p.id;
        if constexpr (std::is_same_v<T, PointMark>)
          return head + " " + fmt2(s.pos.x) + " " + fmt2(s.pos.y);
        else if constexpr (std::is_same_v<T, Segment>)
          return head + " " + fmt_point(s.p1) + " " + fmt_point(s.p2);
        else if constexpr (std::is_same_v<T, Circle>)
          return head + " " + fmt_point(s.center) + " " + fmt2(s.radius);
        else if constexpr (std::is_same_v<T, Arc>)
          return head + " " + fmt_point(s.center) + " " + fmt2(s.radius) + " " +
                 fmt2(s.start_deg) + " " + fmt2(s.end_deg);
        else if constexpr (std::is_same_v<T, Polyline>) {
          for (const auto& q : s.points) head += " " + fmt_point(q);
          return head;
        } else if constexpr (std::is_same_v<T, Label>)
          return head + " " + quote(s.text) + " " + fmt_point(s.anchor) + " " +
                 fmt_point(s.offset);
        else if constexpr (std::is_same_v<T, RightAngleMark>)
          return head + " " + fmt_point(s.vertex) + " " + fmt2(s.arm1_deg) + " " +
                 fmt2(s.arm2_deg) + " " + fmt2(s.size);
        else
          return head + " " + fmt_point(s.midpoint) + " " + fmt2(s.direction_deg);
      },
      p.shape);
}

}  // namespace detail

// Canonical text form: one statement per line, 2-decimal coordinates, program
// order. A `style` line is emitted whenever a primitive's style differs from
// the style in effect.
inline std::string serialize_program(const Program& p) {
  std::string out = "canvas " + std::to_string(p.width) + " " + std::to_string(p.height) + "\n";
  const Style builtin{};
  if (p.defaults != builtin) out += detail::style_line("defaults", p.defaults) + "\n";
  Style current = p.defaults;
  for (const auto& prim : p.primitives) {
    if (prim.style != current) {
      out += detail::style_line("style", prim.style) + "\n";
      current = prim.style;
    }
    out += detail::statement(prim) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Token {
  enum class Kind { Word, Number, Coord, NamedCoord, String };
  Kind kind;
  std::string text;  // word / name / string payload
  double a = 0, b = 0;
  int column = 1;
};

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

inline bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

class LineLexer {
public:
  LineLexer(std::string_view line, int line_no) : s_(line), line_(line_no) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] == '#') break;
      const int col = static_cast<int>(pos_) + 1;
      const char c = s_[pos_];
      if (c == '"') {
        out.push_back(read_string(col));
      } else if (c == '(') {
        auto t = read_coord(col);
        out.push_back(t);
      } else if (is_ident_start(c)) {
        std::size_t start = pos_;
        while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
        Token t{Token::Kind::Word, std::string(s_.substr(start, pos_ - start)), 0, 0, col};
        if (pos_ < s_.size() && s_[pos_] == ':') {
          ++pos_;
          if (pos_ >= s_.size() || s_[pos_] != '(')
            throw SyntaxError(line_, static_cast<int>(pos_) + 1, "expected '(' after ':'");
          auto coord = read_coord(static_cast<int>(pos_) + 1);
          t.kind = Token::Kind::NamedCoord;
          t.a = coord.a;
          t.b = coord.b;
        }
        out.push_back(std::move(t));
      } else {
        std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) &&
               s_[pos_] != '#')
          ++pos_;
        auto word = s_.substr(start, pos_ - start);
        double v;
        if (!parse_real(word, v))
          throw SyntaxError(line_, col, "unexpected token '" + std::string(word) + "'");
        out.push_back({Token::Kind::Number, std::string(word), v, 0, col});
      }
    }
    return out;
  }

private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  Token read_coord(int col) {
    ++pos_;  // '('
    auto close = s_.find(')', pos_);
    if (close == std::string_view::npos) throw SyntaxError(line_, col, "unterminated coordinate");
    auto inner = s_.substr(pos_, close - pos_);
    auto comma = inner.find(',');
    if (comma == std::string_view::npos)
      throw SyntaxError(line_, col, "coordinate needs the form (x,y)");
    auto trim = [](std::string_view v) {
      while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
      while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
      return v;
    };
    double x, y;
    if (!parse_real(trim(inner.substr(0, comma)), x) || !parse_real(trim(inner.substr(comma + 1)), y))
      throw SyntaxError(line_, col, "malformed coordinate");
    pos_ = close + 1;
    return {Token::Kind::Coord, "", x, y, col};
  }

  Token read_string(int col) {
    ++pos_;
    std::string text;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        text += (e == 'n') ? '\n' : e;
      } else {
        text += c;
      }
    }
    if (pos_ >= s_.size()) throw SyntaxError(line_, col, "unterminated string");
    ++pos_;
    return {Token::Kind::String, std::move(text), 0, 0, col};
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

class StatementParser {
public:
  StatementParser(std::vector<Token> toks, int line, std::map<std::string, Point2D>& names)
      : t_(std::move(toks)), line_(line), names_(names) {}

  bool done() const { return i_ >= t_.size(); }

  const Token& peek() const { return t_[i_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    int col = done() ? (t_.empty() ? 1 : t_.back().column) : t_[i_].column;
    throw SyntaxError(line_, col, msg);
  }

  std::string word(const char* what) {
    if (done() || t_[i_].kind != Token::Kind::Word) fail(std::string("expected ") + what);
    return t_[i_++].text;
  }

  double number(const char* what) {
    if (done() || t_[i_].kind != Token::Kind::Number) fail(std::string("expected ") + what);
    return t_[i_++].a;
  }

  int integer(const char* what) {
    const int col = done() ? 0 : t_[i_].column;
    double v = number(what);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw SyntaxError(line_, col, std::string("expected integer ") + what);
    return static_cast<int>(v);
  }

  std::string string_literal() {
    if (done() || t_[i_].kind != Token::Kind::String) fail("expected quoted text");
    return t_[i_++].text;
  }

  bool at_coord() const {
    return !done() && (t_[i_].kind == Token::Kind::Coord || t_[i_].kind == Token::Kind::NamedCoord ||
                       t_[i_].kind == Token::Kind::Word);
  }

  Point2D coord() {
    if (done()) fail("expected coordinate");
    const Token& t = t_[i_++];
    switch (t.kind) {
      case Token::Kind::Coord:
        return {t.a, t.b};
      case Token::Kind::NamedCoord:
        names_.try_emplace(t.text, Point2D{t.a, t.b});
        return {t.a, t.b};
      case Token::Kind::Word: {
        auto it = names_.find(t.text);
        if (it == names_.end()) throw DanglingReference(t.text, line_);
        return it->second;
      }
      default:
        --i_;
        fail("expected coordinate");
    }
  }

  void expect_end() const {
    if (!done()) fail("unexpected trailing token");
  }

private:
  std::vector<Token> t_;
  std::size_t i_ = 0;
  int line_;
  std::map<std::string, Point2D>& names_;
};

inline void parse_style_clauses(StatementParser& sp, Style& style) {
  if (sp.done()) sp.fail("style needs at least one attribute");
  while (!sp.done()) {
    auto key = sp.word("style attribute");
    if (key == "width") {
      style.stroke_width = sp.number("width");
    } else if (key == "color") {
      std::array<int, 3> c{};
      for (auto& ch : c) {
        ch = sp.integer("color channel");
        if (ch < 0 || ch > 255) sp.fail("color channel out of [0, 255]");
      }
      style.color = {static_cast<std::uint8_t>(c[0]), static_cast<std::uint8_t>(c[1]),
                     static_cast<std::uint8_t>(c[2])};
    } else if (key == "dash") {
      auto d = sp.word("solid|dashed");
      if (d == "solid") style.dash = Dash::Solid;
      else if (d == "dashed") style.dash = Dash::Dashed;
      else sp.fail("dash must be solid or dashed");
    } else {
      sp.fail("unknown style attribute '" + key + "'");
    }
  }
}

}  // namespace detail

inline Program parse_program(std::string_view text) {
  using namespace detail;
  Program prog;
  std::map<std::string, Point2D> names;
  std::set<std::string> ids;
  Style current{};
  bool have_canvas = false;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

    auto toks = LineLexer(raw, line_no).run();
    if (toks.empty()) continue;
    StatementParser sp(std::move(toks), line_no, names);
    const int kw_col = sp.peek().column;
    auto kw = sp.word("statement keyword");

    if (!have_canvas) {
      if (kw != "canvas") throw SyntaxError(line_no, kw_col, "program must start with 'canvas W H'");
      prog.width = sp.integer("canvas width");
      prog.height = sp.integer("canvas height");
      if (prog.width < 1 || prog.height < 1) throw SyntaxError(line_no, kw_col, "canvas must be >= 1x1");
      sp.expect_end();
      have_canvas = true;
      continue;
    }
    if (kw == "canvas") throw SyntaxError(line_no, kw_col, "duplicate canvas statement");
    if (kw == "style") {
      parse_style_clauses(sp, current);
      continue;
    }
    if (kw == "defaults") {
      if (!prog.primitives.empty())
        throw SyntaxError(line_no, kw_col, "defaults must precede all primitives");
      parse_style_clauses(sp, prog.defaults);
      current = prog.defaults;
      continue;
    }

    Primitive prim;
    prim.style = current;
    prim.id = sp.word("primitive id");
    if (!ids.insert(prim.id).second) throw DuplicateId(prim.id, line_no);

    if (kw == "point") {
      Point2D pos;
      if (!sp.done() && sp.peek().kind == Token::Kind::Number) {
        pos.x = sp.number("x");
        pos.y = sp.number("y");
      } else {
        pos = sp.coord();
      }
      names[prim.id] = pos;
      prim.shape = PointMark{pos};
    } else if (kw == "segment") {
      Segment s;
      s.p1 = sp.coord();
      s.p2 = sp.coord();
      prim.shape = s;
    } else if (kw == "circle") {
      Circle c;
      c.center = sp.coord();
      c.radius = sp.number("radius");
      prim.shape = c;
    } else if (kw == "arc") {
      Arc a;
      a.center = sp.coord();
      a.radius = sp.number("radius");
      a.start_deg = normalize_degrees(sp.number("start angle"));
      a.end_deg = normalize_degrees(sp.number("end angle"));
      prim.shape = a;
    } else if (kw == "polyline") {
      Polyline pl;
      while (sp.at_coord()) pl.points.push_back(sp.coord());
      if (pl.points.size() < 2) sp.fail("polyline needs at least 2 points");
      prim.shape = std::move(pl);
    } else if (kw == "label") {
      Label l;
      l.text = sp.string_literal();
      l.anchor = sp.coord();
      if (!sp.done()) l.offset = sp.coord();
      prim.shape = std::move(l);
    } else if (kw == "rightangle") {
      RightAngleMark r;
      r.vertex = sp.coord();
      r.arm1_deg = normalize_degrees(sp.number("arm1 direction"));
      r.arm2_deg = normalize_degrees(sp.number("arm2 direction"));
      if (!sp.done()) r.size = sp.number("size");
      prim.shape = r;
    } else if (kw == "tick") {
      TickMark t;
      t.midpoint = sp.coord();
      t.direction_deg = normalize_degrees(sp.number("direction"));
      prim.shape = t;
    } else {
      throw SyntaxError(line_no, kw_col, "unknown statement '" + kw + "'");
    }
    sp.expect_end();
    prog.primitives.push_back(std::move(prim));
  }
  if (!have_canvas) throw SyntaxError(1, 1, "missing canvas statement");
  return prog;
}

}  // namespace geo
