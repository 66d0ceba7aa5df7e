#include <fmt/format.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <system_error>

#include "../dataio/csv.hpp"
#include "epinuts/cli.hpp"
#include "epinuts/diagnostics.hpp"
#include "epinuts/error.hpp"

namespace epinuts::cli {

namespace fs = std::filesystem;

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<ParameterSummary> summarize(const std::vector<std::string>& names, const DrawTable& draws) {
  if (draws.empty()) throw UsageError("no chains to summarize");
  std::vector<ParameterSummary> rows;
  rows.reserve(names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    sampler::ChainDraws chains(draws.size());
    std::vector<double> pooled;
    for (std::size_t c = 0; c < draws.size(); ++c) {
      for (const auto& row : draws[c]) {
        if (row.size() != names.size()) throw UsageError("draw width does not match parameter names");
        chains[c].push_back(row[j]);
        pooled.push_back(row[j]);
      }
    }
    ParameterSummary s{};
    s.name = names[j];
    const double n = static_cast<double>(pooled.size());
    double mean = 0.0;
    for (double v : pooled) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : pooled) ss += (v - mean) * (v - mean);
    s.mean = mean;
    s.sd = pooled.size() > 1 ? std::sqrt(ss / (n - 1.0)) : std::nan("");
    std::sort(pooled.begin(), pooled.end());
    s.q5 = quantile(pooled, 0.05);
    s.q50 = quantile(pooled, 0.5);
    s.q95 = quantile(pooled, 0.95);
    const auto rhat = sampler::split_rhat(chains);
    const auto ess = sampler::ess_bulk(chains);
    s.rhat = rhat.value;
    s.ess_bulk = ess.value;
    std::vector<std::string> notes;
    if (draws.size() == 1) notes.emplace_back("single chain: R-hat from split halves");
    if (!rhat.note.empty()) notes.push_back(rhat.note);
    if (!ess.note.empty() && ess.note != rhat.note) notes.push_back(ess.note);
    s.note = fmt::format("{}", fmt::join(notes, "; "));
    rows.push_back(std::move(s));
  }
  return rows;
}

std::string summary_csv(const std::vector<ParameterSummary>& rows) {
  std::string out = "parameter,mean,sd,q5,q50,q95,rhat,ess_bulk,note\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n",
                       dataio::csv::escape(r.name), r.mean, r.sd, r.q5, r.q50, r.q95, r.rhat, r.ess_bulk,
                       dataio::csv::escape(r.note));
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

StagedOutput::StagedOutput(fs::path target) : target_(std::move(target)) {
  fs::path parent = fs::absolute(target_).parent_path();
  fs::create_directories(parent);
  // Same filesystem as the target, so commit() is a rename.
  std::random_device rd;
  for (int attempt = 0;; ++attempt) {
    staging_ = parent / fmt::format(".{}.staging-{}-{:08x}", target_.filename().string(), ::getpid(), rd());
    if (fs::create_directory(staging_)) break;
    if (attempt > 16) throw std::runtime_error("cannot create a staging directory");
  }
}

StagedOutput::~StagedOutput() {
  std::error_code ec;
  fs::remove_all(staging_, ec);
}

fs::path StagedOutput::write(const fs::path& relative, std::string_view contents) {
  if (committed_) throw UsageError("staged output already committed");
  const fs::path path = staging_ / relative;
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  if (std::find(files_.begin(), files_.end(), relative) == files_.end()) files_.push_back(relative);
  return path;
}

std::vector<fs::path> StagedOutput::commit() {
  if (committed_) throw UsageError("staged output already committed");
  std::vector<fs::path> final_paths;
  if (!fs::exists(target_)) {
    fs::rename(staging_, target_);
  } else {
    for (const auto& rel : files_) {
      const fs::path dest = target_ / rel;
      fs::create_directories(dest.parent_path());
      fs::rename(staging_ / rel, dest);
    }
  }
  for (const auto& rel : files_) final_paths.push_back(target_ / rel);
  committed_ = true;
  return final_paths;
}

}  // namespace epinuts::cli
