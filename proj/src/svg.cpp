#include "tracekit/svg.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "tracekit/error.hpp"

namespace tracekit {

namespace pt = boost::property_tree;

namespace {

std::string num(double v) {
  if (v == 0) v = 0;  // no "-0"
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%f", v);
  return buf;
}

void append_point(std::string& d, Point p, double height) {
  d += num(p.x);
  d += ' ';
  d += num(height - p.y);
}

std::string path_data(const VectorPath& path, double height) {
  std::string d;
  for (const auto& loop : path.loops) {
    if (!d.empty()) d += ' ';
    d += 'M';
    append_point(d, loop.start, height);
    for (const auto& s : loop.segments) {
      if (s.kind == SegmentKind::line) {
        d += " L";
      } else {
        d += " C";
        append_point(d, s.c1, height);
        d += ' ';
        append_point(d, s.c2, height);
        d += ' ';
      }
      append_point(d, s.end, height);
    }
    d += " z";
  }
  return d;
}

// Affine map (a c e; b d f).
struct Affine {
  double a = 1, b = 0, c = 0, d = 1, e = 0, f = 0;
  Point apply(Point p) const { return {a * p.x + c * p.y + e, b * p.x + d * p.y + f}; }
  Affine then(const Affine& inner) const {
    return {a * inner.a + c * inner.b, b * inner.a + d * inner.b, a * inner.c + c * inner.d,
            b * inner.c + d * inner.d, a * inner.e + c * inner.f + e, b * inner.e + d * inner.f + f};
  }
};

class Scanner {
 public:
  explicit Scanner(std::string_view s) : s_(s) {}

  void skip_separators() {
    while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == ',')) ++pos_;
  }
  bool done() {
    skip_separators();
    return pos_ >= s_.size();
  }
  char peek() { return done() ? '\0' : s_[pos_]; }
  char take() { return s_[pos_++]; }
  bool at_number() {
    const char ch = peek();
    return ch == '-' || ch == '+' || ch == '.' || std::isdigit(static_cast<unsigned char>(ch));
  }

  double number() {
    skip_separators();
    const std::size_t begin = pos_;
    std::size_t i = pos_;
    if (i < s_.size() && (s_[i] == '+' || s_[i] == '-')) ++i;
    std::size_t digits = 0;
    while (i < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i]))) ++i, ++digits;
    if (i < s_.size() && s_[i] == '.') {
      ++i;
      while (i < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i]))) ++i, ++digits;
    }
    if (digits == 0) throw Error("malformed number at offset " + std::to_string(begin));
    if (i < s_.size() && (s_[i] == 'e' || s_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
      std::size_t exp_digits = 0;
      while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j, ++exp_digits;
      if (exp_digits == 0) throw Error("malformed number at offset " + std::to_string(begin));
      i = j;
    }
    std::size_t from = begin;
    if (s_[from] == '+') ++from;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + from, s_.data() + i, v);
    if (ec != std::errc() || ptr != s_.data() + i) throw Error("malformed number at offset " + std::to_string(begin));
    if (!std::isfinite(v)) throw Error("non-finite number at offset " + std::to_string(begin));
    pos_ = i;
    return v;
  }

  std::string_view rest() const { return s_.substr(pos_); }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

Affine parse_transform(std::string_view text) {
  Affine m;
  Scanner sc(text);
  while (!sc.done()) {
    std::string name;
    while (!sc.done() && std::isalpha(static_cast<unsigned char>(sc.peek()))) name += sc.take();
    if (sc.peek() != '(') throw Error("malformed transform: " + std::string(text));
    sc.take();
    std::vector<double> args;
    while (sc.peek() != ')') {
      if (sc.done()) throw Error("malformed transform: " + std::string(text));
      args.push_back(sc.number());
    }
    sc.take();
    Affine t;
    if (name == "translate" && (args.size() == 1 || args.size() == 2)) {
      t.e = args[0];
      t.f = args.size() == 2 ? args[1] : 0.0;
    } else if (name == "scale" && (args.size() == 1 || args.size() == 2)) {
      t.a = args[0];
      t.d = args.size() == 2 ? args[1] : args[0];
    } else if (name == "matrix" && args.size() == 6) {
      t = {args[0], args[1], args[2], args[3], args[4], args[5]};
    } else {
      throw Error("unsupported transform: " + name);
    }
    m = m.then(t);
  }
  return m;
}

pt::ptree read_xml_tree(std::string_view svg) {
  std::istringstream in{std::string(svg)};
  pt::ptree tree;
  try {
    pt::read_xml(in, tree, pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw Error(std::string("malformed XML: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

std::optional<std::string> attribute(const pt::ptree& node, const char* name) {
  if (auto attrs = node.get_child_optional("<xmlattr>"))
    if (auto v = attrs->get_optional<std::string>(name)) return *v;
  return std::nullopt;
}

double parse_length(const std::string& s) {
  Scanner sc(s);
  const double v = sc.number();
  const auto unit = sc.rest();
  if (!(unit.empty() || unit == "pt" || unit == "px")) throw Error("unsupported length unit in '" + s + "'");
  return v;
}

SubPath transformed(SubPath sp, const Affine& m) {
  sp.start = m.apply(sp.start);
  for (auto& s : sp.segments) {
    s.c1 = m.apply(s.c1);
    s.c2 = m.apply(s.c2);
    s.end = m.apply(s.end);
  }
  return sp;
}

void collect_paths(const pt::ptree& node, const Affine& outer, VectorDoc& doc) {
  for (const auto& [tag, child] : node) {
    if (tag == "<xmlattr>" || tag == "<xmlcomment>") continue;
    Affine m = outer;
    if (auto tr = attribute(child, "transform")) m = outer.then(parse_transform(*tr));
    if (tag == "path") {
      VectorPath vp;
      for (auto& sp : parse_path_data(attribute(child, "d").value_or(""))) vp.loops.push_back(transformed(std::move(sp), m));
      if (!vp.loops.empty()) doc.paths.push_back(std::move(vp));
    } else if (tag == "g" || tag == "svg") {
      collect_paths(child, m, doc);
    }
  }
}

void count_paths(const pt::ptree& node, ComplexityStats& st) {
  for (const auto& [tag, child] : node) {
    if (tag == "<xmlattr>") continue;
    if (tag == "path") {
      const auto len = attribute(child, "d").value_or("").size();
      ++st.path_count;
      st.total_d_chars += len;
      st.longest_path_chars = std::max(st.longest_path_chars, len);
    }
    count_paths(child, st);
  }
}

}  // namespace

std::string emit_svg(const VectorDoc& doc) {
  std::string out;
  out += "<?xml version=\"1.0\" standalone=\"no\"?>\n";
  out += "<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 20010904//EN\"\n";
  out += " \"http://www.w3.org/TR/2001/REC-SVG-20010904/DTD/svg10.dtd\">\n";
  out += "<svg version=\"1.0\" xmlns=\"http://www.w3.org/2000/svg\"\n";
  out += " width=\"" + fixed(doc.width) + "pt\" height=\"" + fixed(doc.height) + "pt\" viewBox=\"0 0 " +
         fixed(doc.width) + " " + fixed(doc.height) + "\"\n";
  out += " preserveAspectRatio=\"xMidYMid meet\">\n";
  out += "<metadata>\nCreated by tracekit 1.0\n</metadata>\n";
  out += "<g transform=\"translate(0," + num(doc.height) + ") scale(1,-1)\"\n";
  out += "fill=\"#000000\" stroke=\"none\">\n";
  for (const auto& p : doc.paths) {
    if (p.loops.empty()) continue;
    out += "<path d=\"" + path_data(p, doc.height) + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::vector<SubPath> parse_path_data(std::string_view d) {
  std::vector<SubPath> out;
  Scanner sc(d);
  Point cur{}, start{};
  bool open = false;
  char cmd = '\0';

  auto begin_if_needed = [&] {
    if (!open) {
      out.push_back({cur, {}});
      start = cur;
      open = true;
    }
  };
  auto point = [&](bool rel) {
    const double x = sc.number();
    const double y = sc.number();
    return rel ? Point{cur.x + x, cur.y + y} : Point{x, y};
  };

  while (!sc.done()) {
    if (!sc.at_number()) {
      cmd = sc.take();
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(cmd)));
      if (up != 'M' && up != 'L' && up != 'H' && up != 'V' && up != 'C' && up != 'Z')
        throw Error(std::string("unsupported command '") + cmd + "' in path data");
      if (up == 'Z') {
        if (open) cur = start;
        open = false;
        continue;
      }
    } else if (cmd == '\0' || cmd == 'z' || cmd == 'Z') {
      throw Error("path data must start with a command");
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd)) != 0;
    switch (std::toupper(static_cast<unsigned char>(cmd))) {
      case 'M':
        cur = point(rel);
        out.push_back({cur, {}});
        start = cur;
        open = true;
        cmd = rel ? 'l' : 'L';  // further pairs are implicit line-tos
        break;
      case 'L': {
        begin_if_needed();
        cur = point(rel);
        out.back().segments.push_back({SegmentKind::line, {}, {}, cur});
        break;
      }
      case 'H': {
        begin_if_needed();
        const double x = sc.number();
        cur.x = rel ? cur.x + x : x;
        out.back().segments.push_back({SegmentKind::line, {}, {}, cur});
        break;
      }
      case 'V': {
        begin_if_needed();
        const double y = sc.number();
        cur.y = rel ? cur.y + y : y;
        out.back().segments.push_back({SegmentKind::line, {}, {}, cur});
        break;
      }
      case 'C': {
        begin_if_needed();
        const Point c1 = point(rel), c2 = point(rel), end = point(rel);
        cur = end;
        out.back().segments.push_back({SegmentKind::cubic, c1, c2, end});
        break;
      }
    }
  }
  return out;
}

VectorDoc parse_paths(std::string_view svg) {
  const auto tree = read_xml_tree(svg);
  const auto root = tree.get_child_optional("svg");
  if (!root) throw Error("no <svg> root element");
  VectorDoc doc;
  if (auto w = attribute(*root, "width")) doc.width = parse_length(*w);
  if (auto h = attribute(*root, "height")) doc.height = parse_length(*h);
  if (auto vb = attribute(*root, "viewBox"); vb && (doc.width == 0 || doc.height == 0)) {
    Scanner sc(*vb);
    std::array<double, 4> v{};
    for (auto& x : v) x = sc.number();
    doc.width = v[2];
    doc.height = v[3];
  }
  Affine identity;
  if (auto tr = attribute(*root, "transform")) identity = parse_transform(*tr);
  collect_paths(*root, identity, doc);
  return doc;
}

ComplexityStats complexity_stats(std::string_view svg) {
  ComplexityStats st;
  count_paths(read_xml_tree(svg), st);
  return st;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace tracekit
