#include "acbc/sdp_json.hpp"

#include "acbc/error.hpp"

namespace acbc::sdp {

using nlohmann::json;

json problem_to_json(const SdpProblem& p) {
  json j;
  j["format_version"] = kProblemFormatVersion;
  j["num_vars"] = p.num_vars;
  j["objective"] = std::vector<double>(p.c.data(), p.c.data() + p.c.size());
  j["offset"] = p.offset;
  json eq = json::array();
  for (int r = 0; r < p.A_eq.rows(); ++r) {
    json row;
    json idx = json::array(), val = json::array();
    for (int c = 0; c < p.A_eq.cols(); ++c) {
      if (p.A_eq(r, c) != 0.0) {
        idx.push_back(c);
        val.push_back(p.A_eq(r, c));
      }
    }
    row["vars"] = idx;
    row["coefs"] = val;
    row["rhs"] = p.b_eq(r);
    eq.push_back(row);
  }
  j["equalities"] = eq;
  json blocks = json::array();
  for (const auto& b : p.blocks) {
    json jb;
    jb["kind"] = b.kind == BlockKind::Psd ? "psd" : "nonneg";
    jb["dim"] = b.dim;
    json entries = json::array();
    for (int r = 0; r < b.dim; ++r) {
      if (b.kind == BlockKind::Psd) {
        for (int c = r; c < b.dim; ++c) {
          if (b.constant(r, c) != 0.0) entries.push_back({-1, r, c, b.constant(r, c)});
        }
      } else if (b.constant(r, 0) != 0.0) {
        entries.push_back({-1, r, r, b.constant(r, 0)});
      }
    }
    for (const auto& e : b.coefs) entries.push_back({e.var, e.row, e.col, e.value});
    jb["entries"] = entries;
    blocks.push_back(jb);
  }
  j["blocks"] = blocks;
  return j;
}

SdpProblem problem_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kProblemFormatVersion) {
      throw Error(ErrorKind::Config, "unsupported SDP format_version");
    }
    SdpProblem p;
    p.num_vars = j.at("num_vars").get<int>();
    const auto obj = j.at("objective").get<std::vector<double>>();
    p.c = Eigen::Map<const Eigen::VectorXd>(obj.data(), static_cast<Eigen::Index>(obj.size()));
    p.offset = j.value("offset", 0.0);
    const auto& eq = j.at("equalities");
    p.A_eq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(eq.size()), p.num_vars);
    p.b_eq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(eq.size()));
    for (std::size_t r = 0; r < eq.size(); ++r) {
      const auto idx = eq[r].at("vars").get<std::vector<int>>();
      const auto val = eq[r].at("coefs").get<std::vector<double>>();
      if (idx.size() != val.size()) throw Error(ErrorKind::Config, "equality row size");
      for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= p.num_vars) {
          throw Error(ErrorKind::Config, "equality variable index");
        }
        p.A_eq(static_cast<Eigen::Index>(r), idx[k]) = val[k];
      }
      p.b_eq(static_cast<Eigen::Index>(r)) = eq[r].at("rhs").get<double>();
    }
    for (const auto& jb : j.at("blocks")) {
      Block b;
      const auto kind = jb.at("kind").get<std::string>();
      if (kind == "psd") b.kind = BlockKind::Psd;
      else if (kind == "nonneg") b.kind = BlockKind::Nonneg;
      else throw Error(ErrorKind::Config, "unknown block kind " + kind);
      b.dim = jb.at("dim").get<int>();
      if (b.dim <= 0) throw Error(ErrorKind::Config, "block dim must be positive");
      b.constant = Eigen::MatrixXd::Zero(b.dim, b.kind == BlockKind::Psd ? b.dim : 1);
      for (const auto& e : jb.at("entries")) {
        const int var = e.at(0).get<int>();
        const int r = e.at(1).get<int>();
        const int c = e.at(2).get<int>();
        const double v = e.at(3).get<double>();
        if (r < 0 || c < r || c >= b.dim) throw Error(ErrorKind::Config, "entry position");
        if (var < 0) {
          if (b.kind == BlockKind::Psd) {
            b.constant(r, c) = v;
            b.constant(c, r) = v;
          } else {
            b.constant(r, 0) = v;
          }
        } else {
          b.coefs.push_back({var, r, c, v});
        }
      }
      p.blocks.push_back(std::move(b));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad SDP JSON: ") + e.what());
  }
}

}  // namespace acbc::sdp
