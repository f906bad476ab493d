#include "shortfall/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>
#include <utility>

#include "shortfall/rng.hpp"

namespace shortfall {

namespace {

constexpr const char* kHeader =
    "contract_id,contract_type,date,settlement_price,delivery_start,delivery_end";

// Proleptic Gregorian day count (days since 1970-01-01).
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

bool parse_date(const std::string& s, int& y, unsigned& m, unsigned& d) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return false;
    y = std::atoi(s.substr(0, 4).c_str());
    m = static_cast<unsigned>(std::atoi(s.substr(5, 2).c_str()));
    d = static_cast<unsigned>(std::atoi(s.substr(8, 2).c_str()));
    // round trip through the day count rejects 2011-02-30 and friends
    int y2;
    unsigned m2, d2;
    if (m < 1 || m > 12 || d < 1) return false;
    civil_from_days(days_from_civil(y, m, d), y2, m2, d2);
    return y2 == y && m2 == m && d2 == d;
}

bool valid_date(const std::string& s) {
    int y;
    unsigned m, d;
    return parse_date(s, y, m, d);
}

std::string format_date(std::int64_t day) {
    int y;
    unsigned m, d;
    civil_from_days(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    return buf;
}

[[noreturn]] void fail_at(const std::string& path, std::size_t lineno, const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + what);
}

struct Series {
    std::string delivery_start, delivery_end;
    std::vector<std::pair<std::string, double>> quotes;  // date -> price, sorted
};

std::map<std::string, Series> group_series(const std::vector<Quote>& quotes,
                                           const std::string& expected_type,
                                           const std::string& path) {
    std::map<std::string, Series> out;
    for (const Quote& q : quotes) {
        if (q.contract_type != expected_type)
            throw std::invalid_argument(path + ": contract " + q.contract_id + " has type '" +
                                        q.contract_type + "', expected '" + expected_type + "'");
        auto [it, fresh] = out.try_emplace(q.contract_id);
        Series& s = it->second;
        if (fresh) {
            s.delivery_start = q.delivery_start;
            s.delivery_end = q.delivery_end;
        } else if (s.delivery_start != q.delivery_start || s.delivery_end != q.delivery_end) {
            throw std::invalid_argument(path + ": contract " + q.contract_id +
                                        " has inconsistent delivery periods");
        }
        s.quotes.emplace_back(q.date, q.settlement_price);
    }
    for (auto& [id, s] : out) {
        std::sort(s.quotes.begin(), s.quotes.end());
        for (std::size_t i = 1; i < s.quotes.size(); ++i)
            if (s.quotes[i].first == s.quotes[i - 1].first)
                throw std::invalid_argument(path + ": contract " + id + " has duplicate quotes on " +
                                            s.quotes[i].first);
    }
    return out;
}

}  // namespace

std::vector<Quote> parse_quotes_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("parse_quotes_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) fail_at(path, 1, "unexpected header '" + line + "'");

    std::vector<Quote> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 6) fail_at(path, lineno, "expected 6 fields");
        Quote q;
        q.contract_id = fields[0];
        q.contract_type = fields[1];
        q.date = fields[2];
        q.delivery_start = fields[4];
        q.delivery_end = fields[5];
        if (q.contract_id.empty()) fail_at(path, lineno, "empty contract_id");
        if (q.contract_type != "month" && q.contract_type != "quarter")
            fail_at(path, lineno, "contract_type must be 'month' or 'quarter'");
        for (const std::string* ds : {&q.date, &q.delivery_start, &q.delivery_end})
            if (!valid_date(*ds)) fail_at(path, lineno, "invalid ISO-8601 date '" + *ds + "'");
        if (q.delivery_end < q.delivery_start)
            fail_at(path, lineno, "delivery period ends before it starts");
        char* end = nullptr;
        q.settlement_price = std::strtod(fields[3].c_str(), &end);
        if (end != fields[3].c_str() + fields[3].size() || fields[3].empty() ||
            !std::isfinite(q.settlement_price))
            fail_at(path, lineno, "unparseable settlement_price '" + fields[3] + "'");
        if (!(q.settlement_price > 0.0)) fail_at(path, lineno, "nonpositive settlement_price");
        out.push_back(std::move(q));
    }
    return out;
}

ShapingLaw CalibrationResult::empirical_law() const {
    const double w = 1.0 / static_cast<double>(lambda_samples.size());
    return ShapingLaw::empirical(lambda_samples,
                                 std::vector<double>(lambda_samples.size(), w));
}

CalibrationResult calibrate_from_quotes(const std::string& month_csv,
                                        const std::string& quarter_csv) {
    const auto months = group_series(parse_quotes_csv(month_csv), "month", month_csv);
    const auto quarters = group_series(parse_quotes_csv(quarter_csv), "quarter", quarter_csv);
    if (months.empty()) throw std::invalid_argument(month_csv + ": no month contracts");
    if (quarters.empty()) throw std::invalid_argument(quarter_csv + ": no quarter contracts");

    CalibrationResult res;
    for (const auto& [id, m] : months) {
        const Series* covering = nullptr;
        for (const auto& [qid, q] : quarters) {
            if (q.delivery_start <= m.delivery_start && m.delivery_end <= q.delivery_end) {
                if (covering)
                    throw std::invalid_argument("calibrate: month contract " + id +
                                                " is covered by more than one quarter");
                covering = &q;
            }
        }
        if (!covering)
            throw std::invalid_argument("calibrate: month contract " + id +
                                        " has no covering quarter contract");
        const std::string& first_date = m.quotes.front().first;
        const auto it = std::lower_bound(covering->quotes.begin(), covering->quotes.end(),
                                         std::make_pair(first_date, 0.0));
        if (it == covering->quotes.end() || it->first != first_date)
            throw std::invalid_argument("calibrate: no quarter quote on " + first_date +
                                        ", the first quotation date of month contract " + id);
        res.lambda_samples.push_back(m.quotes.front().second / it->second);
    }

    // pooled daily log-returns of every contract in both files
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    auto add_returns = [&](const std::map<std::string, Series>& series) {
        for (const auto& [id, s] : series) {
            for (std::size_t i = 1; i < s.quotes.size(); ++i) {
                const double r = std::log(s.quotes[i].second / s.quotes[i - 1].second);
                sum += r;
                sumsq += r * r;
                ++n;
            }
        }
    };
    add_returns(months);
    add_returns(quarters);
    if (n < 2)
        throw std::invalid_argument("calibrate: fewer than 2 return observations in the sample");
    res.n_returns = n;
    const double nn = static_cast<double>(n);
    const double mean_r = sum / nn;
    const double var_r = (sumsq - nn * mean_r * mean_r) / (nn - 1.0);
    const double sigma = std::sqrt(std::max(var_r, 0.0) * 250.0);
    if (!(sigma > 0.0))
        throw std::invalid_argument("calibrate: constant price series, zero volatility");
    // mean log-return estimates mu - sigma^2/2 per day
    res.model.sigma = sigma;
    res.model.mu = mean_r * 250.0 + 0.5 * sigma * sigma;

    const double nl = static_cast<double>(res.lambda_samples.size());
    double lsum = 0.0;
    for (double l : res.lambda_samples) lsum += l;
    res.lambda_mean = lsum / nl;
    double lvar = 0.0;
    for (double l : res.lambda_samples) lvar += (l - res.lambda_mean) * (l - res.lambda_mean);
    res.lambda_variance = res.lambda_samples.size() > 1 ? lvar / (nl - 1.0) : 0.0;
    return res;
}

void write_synthetic_quotes(const std::string& month_csv, const std::string& quarter_csv,
                            std::size_t n_months, const ModelParams& model, const ShapingLaw& law,
                            double x0, std::uint64_t seed) {
    model.validate();
    if (n_months == 0) throw std::invalid_argument("write_synthetic_quotes: n_months must be > 0");
    if (!(x0 > 0.0)) throw std::invalid_argument("write_synthetic_quotes: x0 must be positive");

    constexpr int kQuarterWindow = 230;  // quotation days before delivery
    constexpr int kMonthWindow = 90;     // first month of the quarter; later months start 10 later
    const double dt = 1.0 / 250.0;

    struct QuarterPath {
        std::string id, dstart, dend;
        std::int64_t window_start;
        std::vector<double> prices;
    };
    std::map<std::pair<int, int>, QuarterPath> qpaths;  // (year, quarter index 0..3)

    std::FILE* fm = std::fopen(month_csv.c_str(), "wb");
    if (!fm) throw std::runtime_error("write_synthetic_quotes: cannot open " + month_csv);
    std::fprintf(fm, "%s\n", kHeader);

    std::uint64_t next_quarter_stream = 0;
    for (std::size_t t = 0; t < n_months; ++t) {
        const int y = 2004 + static_cast<int>((9 + t) / 12);
        const unsigned m = static_cast<unsigned>((9 + t) % 12) + 1;
        const unsigned qm = ((m - 1) / 3) * 3 + 1;  // first month of the covering quarter
        const int qy = y;
        const auto qkey = std::make_pair(qy, static_cast<int>(qm));
        auto [qit, fresh] = qpaths.try_emplace(qkey);
        QuarterPath& qp = qit->second;
        if (fresh) {
            char qid[32];
            std::snprintf(qid, sizeof qid, "Q-%04d-Q%u", qy, (qm - 1) / 3 + 1);
            qp.id = qid;
            const std::int64_t qstart = days_from_civil(qy, qm, 1);
            const unsigned em = qm + 3;
            const std::int64_t qend = (em > 12 ? days_from_civil(qy + 1, em - 12, 1)
                                               : days_from_civil(qy, em, 1)) -
                                      1;
            qp.dstart = format_date(qstart);
            qp.dend = format_date(qend);
            qp.window_start = qstart - kQuarterWindow;
            qp.prices.resize(kQuarterWindow);
            RngStream g(seed, next_quarter_stream++);
            double x = x0;
            for (int i = 0; i < kQuarterWindow; ++i) {
                qp.prices[static_cast<std::size_t>(i)] = x;
                x = gbm_step(x, model.mu, model.sigma, dt, g.gaussian_at(static_cast<std::size_t>(i)));
            }
        }

        const std::int64_t mstart = days_from_civil(y, m, 1);
        const std::int64_t mend =
            (m == 12 ? days_from_civil(y + 1, 1, 1) : days_from_civil(y, m + 1, 1)) - 1;
        const std::int64_t qdel_start = days_from_civil(qy, qm, 1);
        const unsigned idx = m - qm;  // 0, 1, 2 within the quarter
        const std::int64_t win_lo = qdel_start - kMonthWindow + 10 * static_cast<std::int64_t>(idx);
        const std::int64_t win_hi = qdel_start - 1;

        RngStream lam(seed, 100000 + t);
        const double lambda = law.sample(lam.uniform_at(0));
        char mid[32];
        std::snprintf(mid, sizeof mid, "M-%04d-%02u", y, m);
        const std::string mstart_s = format_date(mstart);
        const std::string mend_s = format_date(mend);
        for (std::int64_t d = win_lo; d <= win_hi; ++d) {
            const double xq = qp.prices[static_cast<std::size_t>(d - qp.window_start)];
            std::fprintf(fm, "%s,month,%s,%.17g,%s,%s\n", mid, format_date(d).c_str(), lambda * xq,
                         mstart_s.c_str(), mend_s.c_str());
        }
    }
    std::fclose(fm);

    std::FILE* fq = std::fopen(quarter_csv.c_str(), "wb");
    if (!fq) throw std::runtime_error("write_synthetic_quotes: cannot open " + quarter_csv);
    std::fprintf(fq, "%s\n", kHeader);
    for (const auto& [key, qp] : qpaths) {
        for (int i = 0; i < kQuarterWindow; ++i)
            std::fprintf(fq, "%s,quarter,%s,%.17g,%s,%s\n", qp.id.c_str(),
                         format_date(qp.window_start + i).c_str(),
                         qp.prices[static_cast<std::size_t>(i)], qp.dstart.c_str(),
                         qp.dend.c_str());
    }
    std::fclose(fq);
}

}  // namespace shortfall
