#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <audita/error.hpp>
#include <audita/netsim.hpp>

namespace audita::netsim {

    void sim_config::validate() const
    {
        const auto fail = [](const std::string &msg) { throw parameter_error(msg); };
        if (n == 0)
            fail("n must be positive");
        if (d > m || m > n)
            fail("need d <= m <= n, got d=" + std::to_string(d) + " m=" + std::to_string(m) + " n=" + std::to_string(n));
        if (l == 0 || l > k || k > node_count)
            fail("need 1 <= l <= k <= node_count, got l=" + std::to_string(l) + " k=" + std::to_string(k)
                + " node_count=" + std::to_string(node_count));
        if (file_count == 0)
            fail("file_count must be positive");
        if (block_creators == 0)
            fail("block_creators must be positive");
        if (chunk_size == 0)
            fail("chunk_size must be positive");
        if (modulus_bits != 1024 && modulus_bits != 2048 && modulus_bits != 3072)
            fail("modulus_bits must be 1024, 2048 or 3072");
        if (master_seed.empty())
            fail("master_seed must be non-empty");
        if (max_retries == 0)
            fail("max_retries must be positive");
        if (effective_alpha() % l != 0)
            fail("alpha must be divisible by l");
        if (!(latency_base_ms >= 0) || !(latency_spread_ms >= 0) || !(jitter_median_ms >= 0) || !(jitter_sigma >= 0))
            fail("latency parameters must be non-negative");
        std::set<std::uint64_t> seen;
        for (const auto &a: adversaries) {
            if (a.node >= node_count)
                fail("adversary node " + std::to_string(a.node) + " out of range");
            if (!seen.insert(a.node).second)
                fail("node " + std::to_string(a.node) + " has two adversary roles");
            if (!(a.deleted_fraction >= 0.0 && a.deleted_fraction <= 1.0))
                fail("deleted fraction must lie in [0, 1]");
            if (!(a.extra_latency_ms >= 0.0))
                fail("outsourcer latency must be non-negative");
        }
        std::set<std::uint64_t> joins;
        for (const auto &j: late_joins) {
            if (j.node >= node_count)
                fail("late_join node " + std::to_string(j.node) + " out of range");
            if (!joins.insert(j.node).second)
                fail("node " + std::to_string(j.node) + " joins twice");
        }
    }

    std::uint64_t sim_config::effective_alpha() const noexcept
    {
        return alpha == 0 ? l : alpha;
    }

    std::uint64_t sim_config::effective_duration() const noexcept
    {
        return store_duration == 0 ? std::max<std::uint64_t>(max_timestamps, 1) : store_duration;
    }

    double sim_config::nominal_median_latency_ms() const noexcept
    {
        return latency_base_ms + latency_spread_ms / 2.0 + jitter_median_ms;
    }

    const adversary *sim_config::adversary_for(std::uint64_t node) const noexcept
    {
        for (const auto &a: adversaries)
            if (a.node == node)
                return &a;
        return nullptr;
    }

    namespace {
        std::string_view trim(std::string_view s)
        {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
                s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.remove_suffix(1);
            return s;
        }

        std::vector<std::string_view> words(std::string_view s)
        {
            std::vector<std::string_view> out;
            std::size_t i = 0;
            while (i < s.size()) {
                while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
                    ++i;
                const auto start = i;
                while (i < s.size() && s[i] != ' ' && s[i] != '\t')
                    ++i;
                if (i > start)
                    out.push_back(s.substr(start, i - start));
            }
            return out;
        }

        struct line_ctx {
            std::size_t line;

            [[noreturn]] void fail(const std::string &msg) const
            {
                throw config_error("line " + std::to_string(line) + ": " + msg);
            }

            std::uint64_t integer(std::string_view v) const
            {
                std::uint64_t out = 0;
                const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
                if (ec != std::errc {} || p != v.data() + v.size())
                    fail("expected a non-negative integer, got '" + std::string { v } + "'");
                return out;
            }

            double real(std::string_view v) const
            {
                double out = 0;
                const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
                if (ec != std::errc {} || p != v.data() + v.size())
                    fail("expected a number, got '" + std::string { v } + "'");
                return out;
            }

            byte_string hex(std::string_view v) const
            {
                try {
                    return from_hex(v);
                } catch (const error &) {
                    fail("expected a hex string, got '" + std::string { v } + "'");
                }
            }
        };

        std::string fmt_real(double v)
        {
            char buf[64];
            const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            return { buf, p };
        }
    }

    sim_config parse_scenario(std::string_view text)
    {
        sim_config cfg;
        std::size_t pos = 0;
        std::size_t lineno = 0;
        while (pos <= text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos)
                end = text.size();
            auto line = text.substr(pos, end - pos);
            pos = end + 1;
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (line.empty())
                continue;
            const line_ctx lc { lineno };
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                lc.fail("expected 'key = value'");
            const auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            if (value.empty())
                lc.fail("missing value for '" + std::string { key } + "'");

            if (key == "n") cfg.n = lc.integer(value);
            else if (key == "m") cfg.m = lc.integer(value);
            else if (key == "k") cfg.k = lc.integer(value);
            else if (key == "d") cfg.d = lc.integer(value);
            else if (key == "l") cfg.l = lc.integer(value);
            else if (key == "node_count") cfg.node_count = lc.integer(value);
            else if (key == "file_count") cfg.file_count = lc.integer(value);
            else if (key == "master_seed") cfg.master_seed = lc.hex(value);
            else if (key == "file_seed") cfg.file_seed = lc.hex(value);
            else if (key == "max_timestamps") cfg.max_timestamps = lc.integer(value);
            else if (key == "block_creators") cfg.block_creators = lc.integer(value);
            else if (key == "alpha") cfg.alpha = lc.integer(value);
            else if (key == "store_duration") cfg.store_duration = lc.integer(value);
            else if (key == "chunk_size") cfg.chunk_size = lc.integer(value);
            else if (key == "modulus_bits") cfg.modulus_bits = lc.integer(value);
            else if (key == "latency_base_ms") cfg.latency_base_ms = lc.real(value);
            else if (key == "latency_spread_ms") cfg.latency_spread_ms = lc.real(value);
            else if (key == "jitter_median_ms") cfg.jitter_median_ms = lc.real(value);
            else if (key == "jitter_sigma") cfg.jitter_sigma = lc.real(value);
            else if (key == "max_retries") cfg.max_retries = lc.integer(value);
            else if (key == "mode") {
                if (value == "full_crypto")
                    cfg.mode = sim_mode::full_crypto;
                else if (value == "coverage_only")
                    cfg.mode = sim_mode::coverage_only;
                else
                    lc.fail("mode must be full_crypto or coverage_only");
            } else if (key == "adversary") {
                const auto w = words(value);
                if (w.size() < 2)
                    lc.fail("adversary needs '<node> <kind> ...'");
                adversary a;
                a.node = lc.integer(w[0]);
                if (w[1] == "outsourcer" && w.size() == 3) {
                    a.kind = adversary_kind::outsourcer;
                    a.extra_latency_ms = lc.real(w[2]);
                } else if (w[1] == "deleter" && (w.size() == 3 || w.size() == 4)) {
                    a.kind = adversary_kind::deleter;
                    a.deleted_fraction = lc.real(w[2]);
                    if (w.size() == 4) {
                        if (w[3] == "refuse")
                            a.style = deleter_style::refuse;
                        else if (w[3] == "forge")
                            a.style = deleter_style::forge;
                        else
                            lc.fail("deleter style must be refuse or forge");
                    }
                } else if (w[1] == "refuser" && w.size() == 2) {
                    a.kind = adversary_kind::refuser;
                } else {
                    lc.fail("adversary must be '<id> outsourcer <ms>', '<id> deleter <fraction> [refuse|forge]'"
                            " or '<id> refuser'");
                }
                cfg.adversaries.push_back(a);
            } else if (key == "late_join") {
                const auto colon = value.find(':');
                if (colon == std::string_view::npos)
                    lc.fail("late_join must be '<node>:<timestamp>'");
                cfg.late_joins.push_back({ lc.integer(trim(value.substr(0, colon))),
                    lc.integer(trim(value.substr(colon + 1))) });
            } else {
                lc.fail("unknown key '" + std::string { key } + "'");
            }
        }
        cfg.validate();
        return cfg;
    }

    sim_config load_scenario(const std::string &path)
    {
        std::ifstream in { path, std::ios::binary };
        if (!in)
            throw io_error("cannot open scenario file " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_scenario(ss.str());
    }

    std::string format_scenario(const sim_config &cfg)
    {
        std::ostringstream o;
        o << "n = " << cfg.n << '\n'
          << "m = " << cfg.m << '\n'
          << "k = " << cfg.k << '\n'
          << "d = " << cfg.d << '\n'
          << "l = " << cfg.l << '\n'
          << "node_count = " << cfg.node_count << '\n'
          << "file_count = " << cfg.file_count << '\n'
          << "master_seed = " << to_hex(cfg.master_seed) << '\n';
        if (cfg.file_seed)
            o << "file_seed = " << to_hex(*cfg.file_seed) << '\n';
        o << "mode = " << (cfg.mode == sim_mode::full_crypto ? "full_crypto" : "coverage_only") << '\n'
          << "max_timestamps = " << cfg.max_timestamps << '\n'
          << "block_creators = " << cfg.block_creators << '\n'
          << "alpha = " << cfg.alpha << '\n'
          << "store_duration = " << cfg.store_duration << '\n'
          << "chunk_size = " << cfg.chunk_size << '\n'
          << "modulus_bits = " << cfg.modulus_bits << '\n'
          << "latency_base_ms = " << fmt_real(cfg.latency_base_ms) << '\n'
          << "latency_spread_ms = " << fmt_real(cfg.latency_spread_ms) << '\n'
          << "jitter_median_ms = " << fmt_real(cfg.jitter_median_ms) << '\n'
          << "jitter_sigma = " << fmt_real(cfg.jitter_sigma) << '\n'
          << "max_retries = " << cfg.max_retries << '\n';
        for (const auto &a: cfg.adversaries) {
            o << "adversary = " << a.node << ' ';
            switch (a.kind) {
                case adversary_kind::outsourcer:
                    o << "outsourcer " << fmt_real(a.extra_latency_ms);
                    break;
                case adversary_kind::deleter:
                    o << "deleter " << fmt_real(a.deleted_fraction) << ' '
                      << (a.style == deleter_style::forge ? "forge" : "refuse");
                    break;
                case adversary_kind::refuser:
                    o << "refuser";
                    break;
            }
            o << '\n';
        }
        for (const auto &j: cfg.late_joins)
            o << "late_join = " << j.node << ':' << j.timestamp << '\n';
        return o.str();
    }

}
