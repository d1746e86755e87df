#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(QDIFF_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const std::string& name) { return std::string(QDIFF_TEST_DATA) + "/" + name; }

}  // namespace

TEST_CASE("cli: newton polygon and graded module") {
  const Run n = run("newton " + data("tschakaloff.json"));
  CHECK(n.code == 0);
  CHECK(n.out == "-1: 1\n0: 1\n");
  const Run g = run("graded " + data("two_level.json"));
  CHECK(g.code == 0);
  CHECK(g.out.find("\"U\":{}") != std::string::npos);
}

TEST_CASE("cli: exit codes") {
  CHECK(run("newton " + data("malformed.json")).code == 2);
  CHECK(run("newton " + data("bad_field.json")).code == 2);
  CHECK(run("newton " + data("bad_support.json")).code == 2);
  CHECK(run("newton /nonexistent/spec.json").code == 4);
  const Run res = run("check " + data("resonant.json"));
  CHECK(res.code == 1);
  CHECK(res.out.find("equal-slope blocks resonate") != std::string::npos);
  CHECK(run("alien " + data("two_level.json") + " --xi 1.3,0 --method closed").code == 3);
  CHECK(run("sum " + data("rank1.json") + " --c 2,0").code == 3);
  CHECK(run("frobnicate").code != 0);
}

TEST_CASE("cli: alien derivation by both routes") {
  const Run r = run("alien " + data("rank1.json") + " --xi 2,0 --method both");
  CHECK(r.code == 0);
  CHECK(r.out.find("deviation") != std::string::npos);
  CHECK(r.out.find("0.6213466") != std::string::npos);
}

TEST_CASE("cli: scan writes a CSV") {
  const std::string out = std::string(QDIFF_TEST_TMP) + "/scan.csv";
  std::remove(out.c_str());
  const Run r = run("scan " + data("rank1.json") + " --grid 2x3 --out " + out);
  CHECK(r.code == 0);
  std::ifstream in(out);
  REQUIRE(in.good());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line.rfind("c_re,c_im,", 0) == 0);
  while (std::getline(in, line)) ++rows;
  CHECK(rows >= 5);
  CHECK(rows <= 6);
  CHECK(run("scan " + data("rank1.json") + " --grid 1x1 --out /nonexistent/dir/x.csv").code == 4);
}

TEST_CASE("cli: builtin check passes and is deterministic") {
  const Run a = run("check --builtin");
  const Run b = run("check --builtin");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("\"pass\":false") == std::string::npos);
}
