#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "prism/csv.hpp"
#include "prism/embeddings.hpp"
#include "prism/interactions.hpp"
#include "prism/theory.hpp"

namespace fs = std::filesystem;
using namespace prism;

namespace {

struct CmdResult {
  int code = -1;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

CmdResult run_tool(const std::string& args, const std::string& scratch) {
  fs::create_directories(scratch);
  const std::string err_path = scratch + "/stderr.txt";
  const std::string cmd = std::string("\"") + PRISM_TOOL_PATH + "\" " + args + " >" +
                          scratch + "/stdout.txt 2>" + err_path;
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_path);
  return r;
}

// Fresh scratch directory per test case so reruns start clean; lives under
// the system temp directory so running the suite never litters the CWD.
std::string scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("prism_cli_scratch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

const std::string kTinySynth = "--synth 60 30 600 1.0 5 --split 0.8 0.1 0.1 --split-seed 9";

}  // namespace

TEST_CASE("cli: no subcommand and --help exit codes") {
  const auto dir = scratch_dir("basic");
  CHECK(run_tool("", dir).code == 1);
  CHECK(run_tool("--help", dir).code == 0);
  CHECK(run_tool("train --help", dir).code == 0);
  CHECK(run_tool("definitely-not-a-subcommand", dir).code == 1);
}

TEST_CASE("cli: synth writes a loadable interaction file") {
  const auto dir = scratch_dir("synth");
  const auto r = run_tool("synth --spec 40 25 300 0.8 3 --out " + dir + "/edges.tsv", dir);
  CHECK(r.code == 0);
  const auto set = load_interactions(dir + "/edges.tsv");
  CHECK(set.n_users == 40);
  CHECK(set.n_items == 25);
  CHECK(set.edges.size() == 300);
}

TEST_CASE("cli: train produces the full artifact set") {
  const auto dir = scratch_dir("train");
  const auto r = run_tool("train " + kTinySynth +
                              " --loss bpr --dim 8 --lr 0.05 --batch-size 64 --max-epochs 3 "
                              "--seed 7 --quiet --out-dir " + dir + "/run",
                          dir);
  CHECK(r.code == 0);

  const Mat U = load_table(dir + "/run/users.prsm");
  const Mat I = load_table(dir + "/run/items.prsm");
  CHECK(U.rows() == 60);
  CHECK(U.cols() == 8);
  CHECK(I.rows() == 30);
  CHECK(I.cols() == 8);

  const auto epochs = read_csv(dir + "/run/epochs.csv");
  CHECK(join_csv(epochs.header) ==
        "epoch,train_loss,val_ndcg_dot,val_ndcg_cos,mag_popular,mag_neutral,mag_unpopular,"
        "seconds");
  CHECK(epochs.rows.size() == 3);
  for (const auto& row : epochs.rows) {
    CHECK(std::isfinite(parse_double(row[1])));  // train_loss
    CHECK(parse_double(row[2]) >= 0.0);          // val ndcg
    CHECK(parse_double(row[2]) <= 1.0);
  }

  const auto metrics = read_csv(dir + "/run/metrics.csv");
  CHECK(join_csv(metrics.header) ==
        "loss,lambda,wd_mode,alpha,lr,batch_size,dim,seed,scorer,ndcg_overall,ndcg_popular,"
        "ndcg_neutral,ndcg_unpopular,debias_ratio,n_users_evaluated,best_epoch");
  REQUIRE(metrics.rows.size() == 2);
  CHECK(metrics.rows[0][0] == "bpr");
  CHECK(metrics.rows[0][8] == "dot");
  CHECK(metrics.rows[1][8] == "cosine");
  for (const auto& row : metrics.rows) {
    const double overall = parse_double(row[9]);
    CHECK(overall >= 0.0);
    CHECK(overall <= 1.0);
  }

  // Synthetic data carries no external ids, so no id maps are written.
  CHECK_FALSE(fs::exists(dir + "/run/user_ids.tsv"));

  const auto meta = slurp(dir + "/run/model.meta");
  CHECK(meta.find("loss=bpr\n") != std::string::npos);
  CHECK(meta.find("dim=8\n") != std::string::npos);
  CHECK(meta.find("train_edges=480\n") != std::string::npos);
}

TEST_CASE("cli: repeated train runs are byte-identical") {
  const auto dir = scratch_dir("determinism");
  const std::string args = "train " + kTinySynth +
                           " --loss ssm --neg 3 --temperature 0.4 --dim 8 --lr 0.05 "
                           "--batch-size 64 --max-epochs 3 --seed 21 --quiet --out-dir ";
  CHECK(run_tool(args + dir + "/a", dir).code == 0);
  CHECK(run_tool(args + dir + "/b", dir).code == 0);
  CHECK(slurp(dir + "/a/metrics.csv") == slurp(dir + "/b/metrics.csv"));
  CHECK(slurp(dir + "/a/users.prsm") == slurp(dir + "/b/users.prsm"));
  CHECK(slurp(dir + "/a/items.prsm") == slurp(dir + "/b/items.prsm"));

  // epochs.csv matches except for its wall-clock column
  const auto ea = read_csv(dir + "/a/epochs.csv");
  const auto eb = read_csv(dir + "/b/epochs.csv");
  REQUIRE(ea.rows.size() == eb.rows.size());
  REQUIRE(ea.header.back() == "seconds");
  for (size_t r = 0; r < ea.rows.size(); ++r) {
    for (size_t c = 0; c + 1 < ea.rows[r].size(); ++c) {
      CHECK(ea.rows[r][c] == eb.rows[r][c]);
    }
  }
}

TEST_CASE("cli: evaluate reproduces the train-time test metrics") {
  const auto dir = scratch_dir("evaluate");
  CHECK(run_tool("train " + kTinySynth +
                     " --loss bpr --dim 8 --max-epochs 2 --seed 3 --quiet --out-dir " + dir +
                     "/run",
                 dir)
            .code == 0);
  CHECK(run_tool("evaluate " + kTinySynth + " --model-dir " + dir + "/run --scorer both "
                     "--out " + dir + "/eval.csv",
                 dir)
            .code == 0);

  const auto eval = read_csv(dir + "/eval.csv");
  CHECK(join_csv(eval.header) ==
        "scorer,ndcg_overall,ndcg_popular,ndcg_neutral,ndcg_unpopular,debias_ratio,"
        "n_users_evaluated");
  REQUIRE(eval.rows.size() == 2);

  const auto metrics = read_csv(dir + "/run/metrics.csv");
  // Same split, exclusion, and strata: evaluate must agree exactly with the
  // metrics written at the end of training.
  for (int s = 0; s < 2; ++s) {
    for (int k = 0; k < 6; ++k) {
      CHECK(eval.rows[s][1 + k] == metrics.rows[s][9 + k]);
    }
  }

  // Mismatched shapes are a configuration error.
  CHECK(run_tool("evaluate --synth 61 30 600 1.0 5 --model-dir " + dir + "/run --out " +
                     dir + "/bad.csv",
                 dir)
            .code == 1);
}

TEST_CASE("cli: correlate reports on stored and bare tables") {
  const auto dir = scratch_dir("correlate");
  CHECK(run_tool("train " + kTinySynth +
                     " --loss bpr --dim 8 --max-epochs 2 --seed 3 --quiet --out-dir " + dir +
                     "/run",
                 dir)
            .code == 0);
  CHECK(run_tool("correlate " + kTinySynth + " --model-dir " + dir + "/run --out " + dir +
                     "/corr.csv",
                 dir)
            .code == 0);
  const auto corr = read_csv(dir + "/corr.csv");
  CHECK(join_csv(corr.header) == "n_items,log_base,pearson_log,spearman,defined");
  REQUIRE(corr.rows.size() == 1);
  CHECK(corr.rows[0][0] == "30");
  CHECK(corr.rows[0][1] == "natural");
  CHECK(corr.rows[0][4] == "1");
  CHECK(std::abs(parse_double(corr.rows[0][2])) <= 1.0 + 1e-12);

  // --table points straight at a stored matrix.
  CHECK(run_tool("correlate " + kTinySynth + " --table " + dir + "/run/items.prsm --out " +
                     dir + "/corr2.csv",
                 dir)
            .code == 0);
  CHECK(slurp(dir + "/corr.csv") == slurp(dir + "/corr2.csv"));

  // Exactly one source must be given.
  CHECK(run_tool("correlate " + kTinySynth + " --out " + dir + "/corr3.csv", dir).code == 1);
}

TEST_CASE("cli: theory heatmap matches the closed form") {
  const auto dir = scratch_dir("heatmap");
  CHECK(run_tool("theory heatmap --eta 0.01 --lambda 1e-6 --cos-sq 0.81 "
                     "--degrees 1 10 100 --bfracs 0.01 0.02 --out " + dir + "/grid.csv",
                 dir)
            .code == 0);
  const auto grid = read_csv(dir + "/grid.csv");
  CHECK(join_csv(grid.header) == "degree,batch_fraction,closed_form");
  REQUIRE(grid.rows.size() == 6);

  TheoryParams p;
  p.eta = 0.01;
  p.lambda = 1e-6;
  p.cos_sq = 0.81;
  p.exp_sq_mag = 1.0;
  p.total_edges = 1.0;
  p.degree = 10;
  p.batch_size = 0.02;
  CHECK(grid.rows[3][0] == format_double(10.0));
  CHECK(grid.rows[3][1] == format_double(0.02));
  CHECK(parse_double(grid.rows[3][2]) == doctest::Approx(theorem1_expected_change(p))
                                             .epsilon(1e-15));
}

TEST_CASE("cli: theory oracle adds simulation columns") {
  const auto dir = scratch_dir("oracle");
  CHECK(run_tool("theory oracle --degrees 0 2 --bfracs 0.5 --trials 2000 --dim 8 --seed 4 "
                     "--out " + dir + "/oracle.csv",
                 dir)
            .code == 0);
  const auto grid = read_csv(dir + "/oracle.csv");
  CHECK(join_csv(grid.header) == "degree,batch_fraction,closed_form,mc_mean,mc_stderr");
  REQUIRE(grid.rows.size() == 2);

  // Degree 0 never enters a batch: the simulation is deterministic decay and
  // must land exactly on the closed form.
  CHECK(parse_double(grid.rows[0][3]) ==
        doctest::Approx(parse_double(grid.rows[0][2])).epsilon(1e-9));
  CHECK(parse_double(grid.rows[0][4]) < 1e-12);

  // Stochastic cell: |mc - closed| within 4 standard errors.
  const double gap = std::abs(parse_double(grid.rows[1][3]) - parse_double(grid.rows[1][2]));
  CHECK(gap <= 4.0 * parse_double(grid.rows[1][4]) + 1e-15);
}

TEST_CASE("cli: sweep over lambda and alpha") {
  const auto dir = scratch_dir("sweep");
  const std::string base = "sweep " + kTinySynth +
                           " --loss bpr --dim 8 --lr 0.05 --batch-size 64 --max-epochs 2 "
                           "--quiet ";
  CHECK(run_tool(base + "--axis lambda --values 0 0.01 --seeds 1 2 --wd-mode full "
                     "--jobs 2 --out-dir " + dir + "/lam",
                 dir)
            .code == 0);
  const auto lam = read_csv(dir + "/lam/sweep.csv");
  CHECK(join_csv(lam.header) ==
        "axis,value,seed,ndcg_overall,ndcg_popular,ndcg_neutral,ndcg_unpopular,debias_ratio,"
        "epochs_to_convergence,pearson_log,spearman,status");
  REQUIRE(lam.rows.size() == 4);
  for (const auto& row : lam.rows) {
    CHECK(row[0] == "lambda");
    CHECK(row[11] == "ok");
  }
  // value-major, seed-minor ordering
  CHECK(lam.rows[0][1] == format_double(0.0));
  CHECK(lam.rows[0][2] == "1");
  CHECK(lam.rows[1][2] == "2");
  CHECK(lam.rows[2][1] == format_double(0.01));

  CHECK(run_tool(base + "--axis alpha --values 0 1 --seeds 1 --out-dir " + dir + "/alp", dir)
            .code == 0);
  const auto alp = read_csv(dir + "/alp/sweep.csv");
  REQUIRE(alp.rows.size() == 2);
  for (const auto& row : alp.rows) CHECK(row[0] == "alpha");

  // Positive lambda values without a decay mode are rejected up front.
  CHECK(run_tool(base + "--axis lambda --values 0 0.01 --out-dir " + dir + "/bad", dir)
            .code == 1);
  // Out-of-range alpha likewise.
  CHECK(run_tool(base + "--axis alpha --values 1.5 --out-dir " + dir + "/bad2", dir)
            .code == 1);
}

TEST_CASE("cli: sweep determinism is independent of job count") {
  const auto dir = scratch_dir("sweepjobs");
  const std::string base = "sweep " + kTinySynth +
                           " --loss bpr --dim 8 --lr 0.05 --batch-size 64 --max-epochs 2 "
                           "--quiet --axis alpha --values 0 0.5 1 --seeds 1 2 ";
  CHECK(run_tool(base + "--jobs 1 --out-dir " + dir + "/j1", dir).code == 0);
  CHECK(run_tool(base + "--jobs 3 --out-dir " + dir + "/j3", dir).code == 0);
  CHECK(slurp(dir + "/j1/sweep.csv") == slurp(dir + "/j3/sweep.csv"));
}

TEST_CASE("cli: dataset files keep their id maps") {
  const auto dir = scratch_dir("idmaps");
  {
    std::ofstream f(dir + "/tiny.tsv");
    // 6 users x 4 items, enough edges that every split stays nonempty
    const char* users[] = {"ann", "bob", "cat", "dee", "eli", "fox"};
    const char* items[] = {"apple", "bread", "corn", "dill"};
    for (const auto* u : users) {
      for (const auto* i : items) f << u << '\t' << i << '\n';
    }
  }
  const auto r = run_tool("train --dataset " + dir + "/tiny.tsv --split 0.7 0.15 0.15 "
                              "--split-seed 2 --loss bpr --dim 4 --max-epochs 2 --seed 1 "
                              "--quiet --out-dir " + dir + "/run",
                          dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir + "/run/user_ids.tsv"));
  CHECK(fs::exists(dir + "/run/item_ids.tsv"));
  const auto ids = slurp(dir + "/run/user_ids.tsv");
  CHECK(ids.find("ann\t0") != std::string::npos);
}

TEST_CASE("cli: config file values apply and flags override them") {
  const auto dir = scratch_dir("config");
  {
    std::ofstream f(dir + "/run.ini");
    f << "[train]\n"
      << "loss = bpr\n"
      << "dim = 4\n"
      << "lr = 0.05\n"
      << "max-epochs = 2\n"
      << "quiet = true\n";
  }
  CHECK(run_tool("--config " + dir + "/run.ini train " + kTinySynth + " --out-dir " + dir +
                     "/a",
                 dir)
            .code == 0);
  CHECK(slurp(dir + "/a/model.meta").find("dim=4\n") != std::string::npos);

  CHECK(run_tool("--config " + dir + "/run.ini train " + kTinySynth + " --dim 6 --out-dir " +
                     dir + "/b",
                 dir)
            .code == 0);
  CHECK(slurp(dir + "/b/model.meta").find("dim=6\n") != std::string::npos);
}

TEST_CASE("cli: failure exit codes are stable") {
  const auto dir = scratch_dir("failures");
  // Missing input file: runtime failure.
  CHECK(run_tool("train --dataset " + dir + "/nope.tsv --out-dir " + dir + "/x", dir).code ==
        2);
  // Invalid ratios: configuration error.
  CHECK(run_tool("train " + kTinySynth + " --split 0.5 0.4 0.2 --out-dir " + dir + "/x", dir)
            .code == 1);
  // Unknown enum values are rejected by the parser.
  CHECK(run_tool("train " + kTinySynth + " --loss nope --out-dir " + dir + "/x", dir).code ==
        1);
  // Positive lambda without a decay mode.
  CHECK(run_tool("train " + kTinySynth + " --lambda 0.1 --out-dir " + dir + "/x", dir)
            .code == 1);
  // Dataset and synth together.
  CHECK(run_tool("train --dataset a.tsv " + kTinySynth + " --out-dir " + dir + "/x", dir)
            .code == 1);
  // Infeasible synthetic request (more edges than user-item pairs).
  CHECK(run_tool("synth --spec 3 3 100 1.0 --out " + dir + "/x.tsv", dir).code == 1);
}
