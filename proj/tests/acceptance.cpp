// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "ictd/commands.hpp"
#include "ictd/csv.hpp"
#include "ictd/mrp.hpp"
#include "ictd/rng.hpp"
#include "ictd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace ictd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double as_double(const json& j) {
  return j.is_number() ? j.get<double>() : io::parse_double(j.get<std::string>());
}

fs::path scratch_root() {
  const fs::path root = fs::temp_directory_path() / "ictd_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  return root;
}

cli::CommandResult run(cli::Command command, std::uint64_t seed, const fs::path& out,
                       void (*tweak)(cli::RunConfig&) = nullptr) {
  cli::RunConfig cfg = cli::default_config(command);
  cfg.seed = seed;
  cfg.output_dir = out.string();
  if (tweak) tweak(cfg);
  return cli::run_command(cfg, out);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion_equivalence() {
  const auto t0 = Clock::now();
  const auto cases = verify::equivalence_suite(verify::EquivalenceSweep{}, 0);
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max({worst, c.max_dev_literal, c.max_dev_structured});
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-9 && secs < 30.0,
         "transformer vs TD oracle over " + std::to_string(cases.size()) +
             " instances, max residual deviation " + fmt("%.3g", worst) + " (<= 1e-9), " +
             fmt("%.2f", secs) + " s (< 30 s)");
}

void criterion_heads() {
  const verify::HeadCheck h = verify::head_closed_form_check(50, 0);
  const double worst = std::max(h.max_dev_head1, h.max_dev_head2);
  report(2, worst <= 1e-10 && h.max_abs_off_row == 0.0,
         "head closed forms on 50 prompts, max deviation " + fmt("%.3g", worst) +
             " (<= 1e-10), max entry outside last row " + fmt("%.3g", h.max_abs_off_row) +
             " (== 0)");
}

void criterion_offset() {
  const verify::OffsetCheck o = verify::offset_check(20, 0);
  report(3, o.variation <= 1e-9 && o.max_dev_from_pad <= 1e-9,
         "raw minus oracle value over 20 queries varies by " + fmt("%.3g", o.variation) +
             " (<= 1e-9), distance from -gamma v(pad) " + fmt("%.3g", o.max_dev_from_pad));
}

void criterion_bellman() {
  const auto t0 = Clock::now();
  const SyntheticDomain dom = SyntheticDomain::appendix_f();
  CounterRng rng(hash64(0, "acceptance-bellman", 0));
  auto draw = [&] {
    Vector s(2);
    s << rng.uniform(-1, 1), rng.uniform(-1, 1);
    return s;
  };
  double worst_analytic = 0.0;
  for (int i = 0; i < 50; ++i) {
    worst_analytic =
        std::max(worst_analytic, std::abs(bellman_residual_check(dom, draw(), 1000, rng).analytic));
  }
  double worst_z = 0.0;
  for (int i = 0; i < 5; ++i) {
    const BellmanCheck c = bellman_residual_check(dom, draw(), 100000, rng);
    worst_z = std::max(worst_z, std::abs(c.monte_carlo) / c.std_err);
  }
  const double secs = seconds_since(t0);
  report(4, worst_analytic <= 1e-12 && worst_z <= 3.0 && secs < 10.0,
         "analytic Bellman residual max " + fmt("%.3g", worst_analytic) +
             " (<= 1e-12) on 50 states, Monte Carlo max |residual|/SE " + fmt("%.2f", worst_z) +
             " (<= 3) on 5 states, " + fmt("%.2f", secs) + " s (< 10 s)");
}

void criterion_surface(const fs::path& root) {
  const auto t0 = Clock::now();
  const json m = run(cli::Command::Surface, 0, root / "surface").summary;
  const double secs = seconds_since(t0);
  const double p = as_double(m["pearson"]);
  const double frac = as_double(m["centered_rmse_fraction"]);
  report(5, p >= 0.99 && frac <= 0.05 && secs < 120.0,
         "appendixF surface n=32 L=30 G=21 tuned alpha " + fmt("%.4g", m["alpha"].get<double>()) +
             ": pearson " + fmt("%.4f", p) + " (>= 0.99), centered RMSE " +
             fmt("%.2f", 100 * frac) + "% of range (<= 5%), " + fmt("%.2f", secs) + " s (< 120 s)");
}

void criterion_ablation(const fs::path& root) {
  const fs::path out = root / "ablate";
  run(cli::Command::Ablate, 0, out);
  bool pass = true;
  std::string detail;
  for (const std::string axis : {"context", "layers"}) {
    const io::CsvTable t = io::read_csv(out / ("ablation_" + axis + ".csv"));
    std::vector<double> rmse;
    std::string values;
    for (const auto& row : t.rows) {
      rmse.push_back(io::parse_double(row[t.column("centered_rmse")]));
      values += (values.empty() ? "" : " ") + fmt("%.3g", rmse.back());
    }
    int inversions = 0;
    for (std::size_t i = 1; i < rmse.size(); ++i) inversions += rmse[i] > rmse[i - 1];
    pass = pass && inversions <= 1;
    detail += axis + " [" + values + "] " + std::to_string(inversions) + " inversion(s); ";
  }
  report(6, pass, "median centered RMSE over 5 seeds across {2,4,8,16,32}: " + detail +
                      "at most 1 allowed per sweep");
}

void criterion_baseline(const fs::path& root) {
  const json m = run(cli::Command::Baseline, 0, root / "baseline").summary;
  const double exp_rmse = as_double(m["arms"]["exponential"]["centered_rmse"]);
  const double lin_rmse = as_double(m["arms"]["linear"]["centered_rmse"]);
  const json fixture = run(cli::Command::Baseline, 0, root / "baseline_linear", [](cli::RunConfig& c) {
                         c.baseline.domain = "linear_value";
                       }).summary;
  const double lin_p = as_double(fixture["arms"]["linear"]["pearson"]);
  report(7, lin_rmse >= 3.0 * exp_rmse && lin_p >= 0.99,
         "appendixF centered RMSE linear " + fmt("%.4g", lin_rmse) + " vs exponential " +
             fmt("%.4g", exp_rmse) + " (ratio " + fmt("%.2f", lin_rmse / exp_rmse) +
             ", >= 3); linear-value fixture linear pearson " + fmt("%.5f", lin_p) + " (>= 0.99)");
}

void criterion_transfer(const fs::path& root) {
  // index.json cells, keyed by (row, col), one entry per seed
  std::map<std::pair<int, int>, std::vector<double>> initial, final_loss;
  std::vector<std::string> eval_family;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const json m = run(cli::Command::Transfer, seed, root / ("transfer_" + std::to_string(seed))).summary;
    eval_family = m["eval_family"].get<std::vector<std::string>>();
    for (const auto& c : m["cells"]) {
      const auto key = std::make_pair(c["row"].get<int>(), c["col"].get<int>());
      initial[key].push_back(as_double(c["initial_loss"]));
      final_loss[key].push_back(as_double(c["final_loss"]));
    }
  }
  // matched: eval domain matched_m8; mismatched: the delta 0.2 domain
  const int matched_col = static_cast<int>(
      std::find(eval_family.begin(), eval_family.end(), "matched_m8") - eval_family.begin());
  const int mismatched_col = 1 - matched_col;
  bool pass = true;
  std::string detail;
  for (int r = 0; r < 2; ++r) {
    const auto mk = std::make_pair(r, matched_col);
    const auto xk = std::make_pair(r, mismatched_col);
    const double m0 = median(initial[mk]);
    const double m1 = median(final_loss[mk]);
    std::vector<double> ratios;
    for (std::size_t s = 0; s < final_loss[mk].size(); ++s) {
      ratios.push_back(final_loss[xk][s] / final_loss[mk][s]);
    }
    const double ratio = median(ratios);
    pass = pass && m1 <= m0 && ratio >= 2.0;
    detail += "row " + std::to_string(r) + ": matched " + fmt("%.4g", m0) + " -> " +
              fmt("%.4g", m1) + ", mismatched/matched final " + fmt("%.3g", ratio) + "; ";
  }
  report(8, pass, "2x2 transfer, medians over 5 seeds: " + detail +
                      "need matched final <= initial and ratio >= 2");
}

void criterion_determinism(const fs::path& root) {
  using cli::Command;
  bool pass = true;
  std::size_t compared = 0;
  std::string detail;
  for (Command c : {Command::Verify, Command::Surface, Command::Train, Command::Ablate,
                    Command::Transfer, Command::Baseline}) {
    const std::string name(cli::to_string(c));
    const auto a = run(c, 7, root / "det_a" / name);
    const auto b = run(c, 7, root / "det_b" / name);
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
      const fs::path& pa = a.artifacts[i];
      const fs::path& pb = b.artifacts[i];
      if (pa.extension() == ".csv") {
        ++compared;
        if (slurp(pa) != slurp(pb)) {
          pass = false;
          detail += " " + pa.filename().string() + " differs;";
        }
      } else if (pa.filename() == "verify_report.json") {
        // no CSV for verify: compare the numeric sections of the report
        // (the embedded config names a different output directory)
        const json ja = json::parse(slurp(pa));
        const json jb = json::parse(slurp(pb));
        ++compared;
        bool same = true;
        for (const char* key : {"equivalence", "dual_form", "heads", "offset", "pass"}) {
          same = same && ja.at(key).dump() == jb.at(key).dump();
        }
        if (!same) {
          pass = false;
          detail += " verify_report.json differs;";
        }
      }
    }
  }
  report(9, pass, "two runs of every command with seed 7: " + std::to_string(compared) +
                      " artifacts compared byte for byte" + (detail.empty() ? "" : ":" + detail));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const fs::path root = scratch_root();
  criterion_equivalence();
  criterion_heads();
  criterion_offset();
  criterion_bellman();
  criterion_surface(root);
  criterion_ablation(root);
  criterion_baseline(root);
  criterion_transfer(root);
  criterion_determinism(root);
  std::printf("%d of 9 criteria failed, %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
