#include "amod/canonical_json.hpp"

#include <cmath>
#include <cstdio>

namespace amod {

namespace {

void write_string(std::string& out, const std::string& s) {
  // Reuse the library's escaping for strings.
  out += Json(s).dump();
}

void write(std::string& out, const Json& v, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map keeps keys sorted
        if (!first) out += ",\n";
        first = false;
        out += inner;
        write_string(out, it.key());
        out += ": ";
        write(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write(out, v[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.12g", d == 0.0 ? 0.0 : d);  // no "-0"
      out += buf;
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  write(out, value, 0);
  out += "\n";
  return out;
}

Json number_or_null(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

}  // namespace amod
