#include "flowvid/nfe.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace flowvid {

std::size_t num_chunks(std::size_t total_length, std::size_t k, std::size_t stride) {
    if (total_length < k)
        throw std::invalid_argument("num_chunks: need L >= k");
    if (stride < 1)
        throw std::invalid_argument("num_chunks: need s >= 1");
    return (total_length - k + stride - 1) / stride + 1;
}

std::size_t nfe_mgm(std::size_t total_length, std::size_t k, std::size_t stride,
                    std::size_t steps) {
    return num_chunks(total_length, k, stride) * steps;
}

std::size_t nfe_fm(std::size_t total_length, std::size_t k, std::size_t stride,
                   std::size_t steps) {
    return num_chunks(total_length, k, stride) * steps;
}

std::size_t nfe_df(std::size_t total_length, std::size_t k, std::size_t stride,
                   std::size_t steps) {
    return num_chunks(total_length, k, stride) * (k + steps);
}

std::size_t nfe_rolling(std::size_t total_length, std::size_t k,
                        std::size_t context, std::size_t steps) {
    if (total_length < k)
        throw std::invalid_argument("nfe_rolling: need L >= k");
    if (context >= k)
        throw std::invalid_argument("nfe_rolling: need m < k");
    const std::size_t per_shift = (steps + (k - context) - 1) / (k - context);
    return steps + (total_length - k) * per_shift + steps;
}

void NfeReport::check() const {
    if (predicted_nfe != measured_nfe)
        throw std::logic_error("NfeReport: measured NFE " +
                               std::to_string(measured_nfe) + " != predicted " +
                               std::to_string(predicted_nfe) + " for " + method);
}

std::string nfe_reports_to_csv(const std::vector<NfeReport>& reports) {
    std::ostringstream out;
    out << "method,L,k,m,s,T,predicted,measured,seconds\n";
    for (const auto& r : reports)
        out << r.method << ',' << r.total_length << ',' << r.k << ',' << r.context
            << ',' << r.stride << ',' << r.steps << ',' << r.predicted_nfe << ','
            << r.measured_nfe << ',' << r.wall_clock_s << '\n';
    return out.str();
}

std::string nfe_reports_to_json(const std::vector<NfeReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json j;
        j["method"] = r.method;
        j["L"] = r.total_length;
        j["k"] = r.k;
        j["m"] = r.context;
        j["s"] = r.stride;
        j["T"] = r.steps;
        j["predicted"] = r.predicted_nfe;
        j["measured"] = r.measured_nfe;
        j["seconds"] = r.wall_clock_s;
        arr.push_back(std::move(j));
    }
    return arr.dump();
}

} // namespace flowvid
