#include <cmath>
#include <audita/error.hpp>
#include <audita/netsim.hpp>

namespace audita::netsim {

    double analytic_coverage(std::uint64_t n, std::uint64_t d, std::uint64_t l, std::uint64_t timestamps)
    {
        if (n == 0 || d > n)
            throw parameter_error("need d <= n with n >= 1");
        if (d == n)
            return timestamps > 0 && l > 0 ? 1.0 : 0.0;
        const double draws = static_cast<double>(l) * static_cast<double>(timestamps);
        const double miss = std::log1p(-static_cast<double>(d) / static_cast<double>(n));
        return -std::expm1(draws * miss);
    }

    std::uint64_t solve_timestamps_for_coverage(std::uint64_t n, std::uint64_t d, std::uint64_t l, double target)
    {
        if (!(target > 0.0 && target < 1.0))
            throw parameter_error("target must lie in (0, 1)");
        if (n == 0 || d > n)
            throw parameter_error("need d <= n with n >= 1");
        if (d == 0 || l == 0)
            throw unreachable_target_error("coverage never grows with d=0 or l=0");
        if (d == n)
            return 1;
        const double per_step = static_cast<double>(l) * std::log1p(-static_cast<double>(d) / static_cast<double>(n));
        const double t = std::ceil(std::log1p(-target) / per_step);
        return t < 1.0 ? 1 : static_cast<std::uint64_t>(t);
    }

    std::optional<std::uint64_t> crossing(const std::vector<double> &history, double target)
    {
        for (std::size_t t = 0; t < history.size(); ++t)
            if (history[t] >= target)
                return t;
        return std::nullopt;
    }

}
