#include "quasiphase/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace quasiphase {

namespace {

std::string format_number(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  // Keep integral-looking doubles recognizable as floats.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void emit(const Json& v, int indent, int depth, std::string& out) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
  case Json::value_t::object: {
    if (v.empty()) {
      out += "{}";
      return;
    }
    out += '{';
    bool first = true;
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!first) out += ',';
      first = false;
      newline(depth + 1);
      out += Json(it.key()).dump();
      out += indent < 0 ? ":" : ": ";
      emit(it.value(), indent, depth + 1, out);
    }
    newline(depth);
    out += '}';
    return;
  }
  case Json::value_t::array: {
    if (v.empty()) {
      out += "[]";
      return;
    }
    // Arrays of scalars stay on one line; nested arrays break per row.
    bool scalars = std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); });
    out += '[';
    bool first = true;
    for (const auto& e : v) {
      if (!first) out += scalars && indent >= 0 ? ", " : ",";
      first = false;
      if (!scalars) newline(depth + 1);
      emit(e, indent, depth + 1, out);
    }
    if (!scalars) newline(depth);
    out += ']';
    return;
  }
  case Json::value_t::number_float:
    out += format_number(v.get<double>());
    return;
  default:
    out += v.dump();
    return;
  }
}

Json matrix_part(const Matrix& m, bool imag) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(imag ? m(r, c).imag() : m(r, c).real());
    rows.push_back(std::move(row));
  }
  return rows;
}

double number_at(const Json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string("operator JSON: non-numeric entry in ") + what, 0);
  return j.get<double>();
}

} // namespace

std::string dump_json(const Json& value, int indent) {
  std::string out;
  emit(value, indent, 0, out);
  out += '\n';
  return out;
}

Json operator_to_json(const TruncatedOperator& op) {
  Json j;
  j["dim"] = op.dim();
  j["re"] = matrix_part(op.matrix(), false);
  j["im"] = matrix_part(op.matrix(), true);
  j["label"] = op.label();
  if (const auto& p = op.closed_form_p())
    j["closed_form_p"] = {{"nbar", p->nbar}, {"re", p->center.real()}, {"im", p->center.imag()}};
  return j;
}

TruncatedOperator operator_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") || !j.contains("im"))
    throw ParseError("operator JSON: expected object with dim, re, im", 0);
  auto dim = j.at("dim").get<std::size_t>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (dim == 0) throw InvalidDimension("operator JSON: dim must be at least 1");
  if (!re.is_array() || !im.is_array() || re.size() != dim || im.size() != dim)
    throw ParseError("operator JSON: re/im must have dim rows", 0);
  auto n = static_cast<Eigen::Index>(dim);
  Matrix m(n, n);
  for (std::size_t r = 0; r < dim; ++r) {
    if (!re[r].is_array() || !im[r].is_array() || re[r].size() != dim || im[r].size() != dim)
      throw ParseError("operator JSON: row " + std::to_string(r) + " has wrong length", r);
    for (std::size_t c = 0; c < dim; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          Complex(number_at(re[r][c], "re"), number_at(im[r][c], "im"));
  }
  std::string label = j.value("label", std::string{});
  bool hermitian = hermiticity_defect(m) <= tolerances().hermitian;
  TruncatedOperator op(std::move(m), std::move(label), hermitian);
  if (j.contains("closed_form_p")) {
    const auto& p = j.at("closed_form_p");
    op = op.with_closed_form_p(GaussianP{p.at("nbar").get<double>(),
                                         Complex(p.value("re", 0.0), p.value("im", 0.0))});
  }
  return op;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TruncatedOperator load_operator(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  return operator_from_json(j);
}

void save_operator(const TruncatedOperator& op, const std::filesystem::path& path) {
  write_file_atomic(path, dump_json(operator_to_json(op)));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

} // namespace quasiphase
