#include "msreg/cloud_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace msreg {

void write_ply(std::ostream& os, const LabeledCloud& cloud, bool with_labels) {
  cloud.validate();
  os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n'
     << "property float x\nproperty float y\nproperty float z\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (with_labels) os << "property uchar label\n";
  os << "end_header\n";
  os << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& c = cloud.colors[i];
    os << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
       << static_cast<float>(p.z()) << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
    if (with_labels) os << ' ' << int(cloud.labels[i]);
    os << '\n';
  }
}

void write_ply(const std::filesystem::path& path, const LabeledCloud& cloud, bool with_labels) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string());
  write_ply(os, cloud, with_labels);
  if (!os) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

LabeledCloud read_ply(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "ply") {
    throw Error(ErrorKind::Format, "missing ply magic");
  }
  std::size_t count = 0;
  bool in_vertex = false;
  bool ascii = false;
  std::vector<std::string> props;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (key == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw Error(ErrorKind::Format, "list properties on vertices unsupported");
      props.push_back(name);
    } else if (key == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorKind::Format, "only ASCII PLY is supported");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1, il = -1;
  for (int k = 0; k < static_cast<int>(props.size()); ++k) {
    const auto& n = props[k];
    if (n == "x") ix = k;
    else if (n == "y") iy = k;
    else if (n == "z") iz = k;
    else if (n == "red") ir = k;
    else if (n == "green") ig = k;
    else if (n == "blue") ib = k;
    else if (n == "label") il = k;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorKind::Format, "PLY lacks x/y/z");

  LabeledCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> values(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : values) {
      if (!(is >> v)) throw Error(ErrorKind::Format, "PLY vertex data truncated");
    }
    const auto u8 = [&](int k, std::uint8_t fallback) {
      return k < 0 ? fallback : static_cast<std::uint8_t>(values[k]);
    };
    cloud.push_back({values[ix], values[iy], values[iz]}, {u8(ir, 0), u8(ig, 0), u8(ib, 0)},
                    u8(il, kNoLabel));
  }
  cloud.validate();
  return cloud;
}

LabeledCloud read_ply(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_ply(is);
}

}  // namespace msreg
