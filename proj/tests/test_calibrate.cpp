#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "shortfall/calibrate.hpp"

using namespace shortfall;

namespace {

constexpr const char* kHeader =
    "contract_id,contract_type,date,settlement_price,delivery_start,delivery_end\n";

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out << body;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempFiles {
    std::string month = "cal_month_test.csv";
    std::string quarter = "cal_quarter_test.csv";
    ~TempFiles() {
        std::remove(month.c_str());
        std::remove(quarter.c_str());
    }
};

std::string toy_month() {
    return std::string(kHeader) +
           "MX,month,2010-01-05,52.5,2010-02-01,2010-02-28\n"
           "MX,month,2010-01-06,52.9,2010-02-01,2010-02-28\n";
}

std::string toy_quarter() {
    return std::string(kHeader) +
           "QX,quarter,2010-01-05,50,2010-01-01,2010-03-31\n"
           "QX,quarter,2010-01-06,50.2,2010-01-01,2010-03-31\n";
}

}  // namespace

TEST_CASE("calibration on a two-contract toy file") {
    TempFiles f;
    write_file(f.month, toy_month());
    write_file(f.quarter, toy_quarter());
    const auto res = calibrate_from_quotes(f.month, f.quarter);
    REQUIRE(res.lambda_samples.size() == 1);
    CHECK(res.lambda_samples[0] == doctest::Approx(1.05).epsilon(1e-15));
    CHECK(res.lambda_mean == doctest::Approx(1.05));
    CHECK(res.lambda_variance == 0.0);
    CHECK(res.n_returns == 2);
    CHECK(res.model.sigma > 0.0);
    const auto law = res.empirical_law();
    CHECK(law.mean() == doctest::Approx(1.05));
}

TEST_CASE("quote parsing rejects malformed input") {
    TempFiles f;
    SUBCASE("wrong header") {
        write_file(f.month, "id,type,day,price\nMX,month,2010-01-05,52.5\n");
        CHECK_THROWS_WITH_AS(parse_quotes_csv(f.month),
                             doctest::Contains("unexpected header"), std::invalid_argument);
    }
    SUBCASE("wrong field count") {
        write_file(f.month, std::string(kHeader) + "MX,month,2010-01-05,52.5,2010-02-01\n");
        CHECK_THROWS_WITH_AS(parse_quotes_csv(f.month), doctest::Contains("expected 6 fields"),
                             std::invalid_argument);
    }
    SUBCASE("nonpositive price") {
        write_file(f.month,
                   std::string(kHeader) + "MX,month,2010-01-05,0,2010-02-01,2010-02-28\n");
        CHECK_THROWS_WITH_AS(parse_quotes_csv(f.month), doctest::Contains("nonpositive"),
                             std::invalid_argument);
    }
    SUBCASE("unparseable price") {
        write_file(f.month,
                   std::string(kHeader) + "MX,month,2010-01-05,fifty,2010-02-01,2010-02-28\n");
        CHECK_THROWS_AS(parse_quotes_csv(f.month), std::invalid_argument);
    }
    SUBCASE("calendar-invalid date") {
        write_file(f.month,
                   std::string(kHeader) + "MX,month,2010-02-30,52.5,2010-02-01,2010-02-28\n");
        CHECK_THROWS_WITH_AS(parse_quotes_csv(f.month), doctest::Contains("invalid ISO-8601"),
                             std::invalid_argument);
    }
    SUBCASE("unknown contract type") {
        write_file(f.month,
                   std::string(kHeader) + "MX,week,2010-01-05,52.5,2010-02-01,2010-02-28\n");
        CHECK_THROWS_AS(parse_quotes_csv(f.month), std::invalid_argument);
    }
}

TEST_CASE("calibration error paths") {
    TempFiles f;
    SUBCASE("month contract without a covering quarter") {
        write_file(f.month, toy_month());
        write_file(f.quarter, std::string(kHeader) +
                                  "QX,quarter,2010-01-05,50,2010-04-01,2010-06-30\n"
                                  "QX,quarter,2010-01-06,50.2,2010-04-01,2010-06-30\n");
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("no covering quarter"), std::invalid_argument);
    }
    SUBCASE("ambiguous coverage") {
        write_file(f.month, toy_month());
        write_file(f.quarter, std::string(kHeader) +
                                  "QX,quarter,2010-01-05,50,2010-01-01,2010-03-31\n"
                                  "QY,quarter,2010-01-05,49,2010-01-01,2010-06-30\n");
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("more than one quarter"), std::invalid_argument);
    }
    SUBCASE("no quarter quote on the month's first date") {
        write_file(f.month, toy_month());
        write_file(f.quarter,
                   std::string(kHeader) + "QX,quarter,2010-01-06,50.2,2010-01-01,2010-03-31\n");
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("first quotation date"), std::invalid_argument);
    }
    SUBCASE("month file holding a quarter row") {
        write_file(f.month,
                   std::string(kHeader) + "QX,quarter,2010-01-05,50,2010-01-01,2010-03-31\n");
        write_file(f.quarter, toy_quarter());
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("expected 'month'"), std::invalid_argument);
    }
    SUBCASE("duplicate quote date") {
        write_file(f.month, toy_month() + "MX,month,2010-01-05,52.5,2010-02-01,2010-02-28\n");
        write_file(f.quarter, toy_quarter());
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("duplicate"), std::invalid_argument);
    }
    SUBCASE("constant prices give zero volatility") {
        write_file(f.month, std::string(kHeader) +
                                "MX,month,2010-01-05,52.5,2010-02-01,2010-02-28\n"
                                "MX,month,2010-01-06,52.5,2010-02-01,2010-02-28\n");
        write_file(f.quarter, std::string(kHeader) +
                                  "QX,quarter,2010-01-05,50,2010-01-01,2010-03-31\n"
                                  "QX,quarter,2010-01-06,50,2010-01-01,2010-03-31\n");
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("zero volatility"), std::invalid_argument);
    }
    SUBCASE("single quotes leave no returns") {
        write_file(f.month,
                   std::string(kHeader) + "MX,month,2010-01-05,52.5,2010-02-01,2010-02-28\n");
        write_file(f.quarter,
                   std::string(kHeader) + "QX,quarter,2010-01-05,50,2010-01-01,2010-03-31\n");
        CHECK_THROWS_WITH_AS(calibrate_from_quotes(f.month, f.quarter),
                             doctest::Contains("fewer than 2 return"), std::invalid_argument);
    }
}

TEST_CASE("synthetic round trip recovers the generator parameters") {
    TempFiles f;
    const ModelParams model{0.0, 0.28};
    const ShapingLaw law = ShapingLaw::scaled_beta(114.0, 227.0, 3.0);
    write_synthetic_quotes(f.month, f.quarter, 78, model, law, 50.89, 2468);

    const auto res = calibrate_from_quotes(f.month, f.quarter);
    CHECK(res.lambda_samples.size() == 78);
    CHECK(std::fabs(res.model.sigma - model.sigma) <= 0.1 * model.sigma);
    CHECK(std::fabs(res.model.mu) < 0.15);
    CHECK(res.n_returns > 5000);

    const double ab = 114.0 + 227.0;
    const double law_sd = 3.0 * std::sqrt(114.0 * 227.0 / (ab * ab * (ab + 1.0)));
    const double se = law_sd / std::sqrt(78.0);
    CHECK(std::fabs(res.lambda_mean - law.mean()) <= 3.0 * se);
    CHECK(res.lambda_variance > 0.0);
    CHECK(res.empirical_law().support_max() < 3.0);

    // first contracts carry the expected identifiers and delivery periods
    const auto quotes = parse_quotes_csv(f.month);
    CHECK(quotes.front().contract_id == "M-2004-10");
    CHECK(quotes.front().delivery_start == "2004-10-01");
    CHECK(quotes.front().delivery_end == "2004-10-31");
    const auto qquotes = parse_quotes_csv(f.quarter);
    CHECK(qquotes.front().contract_id == "Q-2004-Q4");
    CHECK(qquotes.front().delivery_end == "2004-12-31");

    // the generator is deterministic: a rewrite is byte-identical
    const std::string before_m = slurp(f.month), before_q = slurp(f.quarter);
    write_synthetic_quotes(f.month, f.quarter, 78, model, law, 50.89, 2468);
    CHECK(slurp(f.month) == before_m);
    CHECK(slurp(f.quarter) == before_q);
}
