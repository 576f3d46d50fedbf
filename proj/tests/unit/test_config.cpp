#include <doctest.h>

#include "eit/config.hpp"
#include "eit/error.hpp"

using namespace eit;

TEST_CASE("key-value parsing") {
  const auto f = KeyValueFile::parse(
      "# comment\n"
      "variant = ph   # trailing\n"
      "seed=4\n"
      "\n"
      "[prior]\n"
      "gamma_kappa = 5\n"
      "refit = yes\n"
      "[solver]\n"
      "max_iter = 20\n"
      "max_iter = 30\n",
      "test.cfg");
  CHECK(f.get("variant") == "ph");
  CHECK(f.get_int("seed") == 4);
  CHECK(f.get_double("prior.gamma_kappa") == 5.0);
  CHECK(f.get_bool("prior.refit") == true);
  CHECK(f.get_int("solver.max_iter") == 30);
  CHECK(f.all("solver.max_iter").size() == 2);
  CHECK_FALSE(f.has("gamma_kappa"));
  CHECK_FALSE(f.get("missing").has_value());
  CHECK(f.keys().front() == "variant");

  const auto again = KeyValueFile::parse(f.to_string());
  CHECK(again.all("solver.max_iter") == f.all("solver.max_iter"));
  CHECK(again.get("prior.gamma_kappa") == "5");
}

TEST_CASE("key-value errors") {
  CHECK_THROWS_WITH_AS(KeyValueFile::parse("a = 1\nnot a pair\n", "x.cfg"), doctest::Contains("x.cfg:2"),
                       InputError);
  CHECK_THROWS_AS(KeyValueFile::parse("[open\n"), InputError);
  CHECK_THROWS_AS(KeyValueFile::parse("[]\n"), InputError);
  CHECK_THROWS_AS(KeyValueFile::parse(" = 3\n"), InputError);
  const auto f = KeyValueFile::parse("x = 1.5e\nflag = maybe\n");
  CHECK_THROWS_AS(f.get_double("x"), InputError);
  CHECK_THROWS_AS(f.get_int("x"), InputError);
  CHECK_THROWS_AS(f.get_bool("flag"), InputError);
  CHECK_THROWS_AS(KeyValueFile::load("/nonexistent/dir/file.cfg"), InputError);
}

TEST_CASE("number parsing") {
  CHECK(parse_double(" 1e-3 ", "x") == 1e-3);
  CHECK(parse_double("-0.25", "x") == -0.25);
  CHECK_THROWS_AS(parse_double("1.0abc", "x"), InputError);
  CHECK_THROWS_AS(parse_double("", "x"), InputError);
  CHECK(parse_int("42", "n") == 42);
  CHECK_THROWS_AS(parse_int("4.2", "n"), InputError);
}
