#include "hamlearn/io.hpp"

#include "hamlearn/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hamlearn {

using nlohmann::json;

json term_to_json(const PauliTerm& term) {
  return json{{"term", term.label()}, {"c", term.prefactor()}};
}

PauliTerm term_from_json(const json& j) {
  return PauliTerm::parse(j.at("term").get<std::string>(), j.at("c").get<double>());
}

json basis_to_json(const OperatorBasis& basis) {
  json terms = json::array();
  for (const auto& t : basis) terms.push_back(term_to_json(t));
  return json{{"schema", kBasisSchema}, {"L", basis.num_sites()}, {"k", basis.locality()},
              {"terms", std::move(terms)}};
}

OperatorBasis basis_from_json(const json& j) {
  require_schema(j, kBasisSchema);
  std::vector<PauliTerm> terms;
  for (const auto& t : j.at("terms")) terms.push_back(term_from_json(t));
  return OperatorBasis(j.at("L").get<int>(), j.at("k").get<int>(), std::move(terms));
}

json model_to_json(const HamiltonianModel& model) {
  const auto& mu = model.coefficients();
  return json{{"schema", kModelSchema},
              {"basis", basis_to_json(model.basis())},
              {"coefficients", std::vector<double>(mu.data(), mu.data() + mu.size())},
              {"identity_offset", model.identity_offset()}};
}

HamiltonianModel model_from_json(const json& j) {
  require_schema(j, kModelSchema);
  auto basis = std::make_shared<const OperatorBasis>(basis_from_json(j.at("basis")));
  const auto mu = j.at("coefficients").get<std::vector<double>>();
  return HamiltonianModel(std::move(basis), Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())),
                          j.at("identity_offset").get<double>());
}

void require_schema(const json& j, const std::string& expected) {
  if (!j.is_object() || !j.contains("schema")) {
    throw LoadError("document has no schema tag (expected " + expected + ")");
  }
  const auto found = j.at("schema").get<std::string>();
  if (found != expected) {
    throw LoadError("schema mismatch: file has " + found + ", reader expects " + expected);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return out.str();
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace hamlearn
