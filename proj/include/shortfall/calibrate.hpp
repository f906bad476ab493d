#ifndef SHORTFALL_CALIBRATE_HPP
#define SHORTFALL_CALIBRATE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "shortfall/model.hpp"

namespace shortfall {

// One settlement quote. Dates are ISO-8601 (YYYY-MM-DD), so lexicographic
// order is chronological order.
struct Quote {
    std::string contract_id;
    std::string contract_type;  // "month" or "quarter"
    std::string date;
    double settlement_price = 0.0;
    std::string delivery_start;
    std::string delivery_end;  // last delivery day, inclusive
};

// Columns: contract_id,contract_type,date,settlement_price,delivery_start,delivery_end
std::vector<Quote> parse_quotes_csv(const std::string& path);

struct CalibrationResult {
    ModelParams model;                   // annualized from pooled daily log-returns
    std::vector<double> lambda_samples;  // one ratio per month contract, id order
    double lambda_mean = 0.0;
    double lambda_variance = 0.0;  // unbiased sample variance
    std::size_t n_returns = 0;

    ShapingLaw empirical_law() const;
};

// Month/quarter price ratio at each month contract's first quotation date
// (the quarter matched by delivery-period containment), plus GBM parameters
// from the aggregated daily log-returns of both files, annualized with 250
// trading days.
CalibrationResult calibrate_from_quotes(const std::string& month_csv,
                                        const std::string& quarter_csv);

// Synthetic quote files drawn from the model: one GBM path per quarter
// contract, month prices defined as lambda times the covering quarter price
// with lambda drawn from the law once per month. Delivery periods span
// n_months consecutive months starting at 2004-10. Useful for round-trip
// calibration checks.
void write_synthetic_quotes(const std::string& month_csv, const std::string& quarter_csv,
                            std::size_t n_months, const ModelParams& model, const ShapingLaw& law,
                            double x0, std::uint64_t seed);

}  // namespace shortfall

#endif
