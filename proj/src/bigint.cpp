#include <audita/bigint.hpp>
#include <audita/error.hpp>

namespace audita::bigint {

    mpz_class from_bytes(byte_view big_endian)
    {
        mpz_class x;
        if (!big_endian.empty())
            mpz_import(x.get_mpz_t(), big_endian.size(), 1, 1, 1, 0, big_endian.data());
        return x;
    }

    byte_string to_bytes(const mpz_class &x)
    {
        if (x < 0)
            throw parameter_error("negative integers have no byte encoding");
        if (x == 0)
            return {};
        byte_string out((mpz_sizeinbase(x.get_mpz_t(), 2) + 7) / 8);
        std::size_t count = 0;
        mpz_export(out.data(), &count, 1, 1, 1, 0, x.get_mpz_t());
        out.resize(count);
        return out;
    }

    byte_string to_bytes_fixed(const mpz_class &x, std::size_t width)
    {
        auto raw = to_bytes(x);
        if (raw.size() > width)
            throw parameter_error("integer of " + std::to_string(raw.size()) + " bytes exceeds fixed width " + std::to_string(width));
        byte_string out(width - raw.size(), 0);
        out.insert(out.end(), raw.begin(), raw.end());
        return out;
    }

    std::size_t bit_length(const mpz_class &x)
    {
        return x == 0 ? 0 : mpz_sizeinbase(x.get_mpz_t(), 2);
    }

    mpz_class powm(const mpz_class &base, const mpz_class &exp, const mpz_class &mod)
    {
        mpz_class r;
        mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
        return r;
    }

    drbg::drbg(byte_view seed): _seed { seed.begin(), seed.end() }
    {
    }

    void drbg::fill(std::span<std::uint8_t> out)
    {
        byte_writer w;
        w.raw(_seed);
        w.u64(_counter++);
        crypto::expand(crypto::hash_domain::key_derivation, w.bytes(), out);
    }

    mpz_class drbg::bits(std::size_t nbits)
    {
        byte_string buf((nbits + 7) / 8);
        fill(buf);
        if (nbits % 8 != 0)
            buf[0] &= static_cast<std::uint8_t>((1u << (nbits % 8)) - 1);
        return from_bytes(buf);
    }

    mpz_class drbg::below(const mpz_class &bound)
    {
        if (bound <= 0)
            throw parameter_error("drbg bound must be positive");
        const auto nbits = bit_length(bound);
        for (;;) {
            auto x = bits(nbits);
            if (x < bound)
                return x;
        }
    }

    namespace {
        const std::vector<unsigned> &sieve_primes()
        {
            static const std::vector<unsigned> primes = [] {
                constexpr unsigned limit = 1u << 15;
                std::vector<bool> composite(limit);
                std::vector<unsigned> out;
                for (unsigned i = 3; i < limit; i += 2) {
                    if (composite[i])
                        continue;
                    out.push_back(i);
                    for (unsigned j = i * i; j < limit; j += 2 * i)
                        composite[j] = true;
                }
                return out;
            }();
            return primes;
        }

        bool fermat_base2(const mpz_class &n)
        {
            const mpz_class two = 2;
            return powm(two, n - 1, n) == 1;
        }
    }

    mpz_class generate_safe_prime(std::size_t nbits, drbg &rng, std::size_t max_rounds)
    {
        if (nbits < 16)
            throw parameter_error("safe prime size too small");
        const auto &primes = sieve_primes();
        const std::size_t qbits = nbits - 1;
        // Each round fixes a random odd base q0 and scans q0, q0+2, ...; survivors
        // of the sieve get Fermat then Miller-Rabin on both q and 2q+1.
        constexpr unsigned window = 1u << 18;
        std::vector<unsigned> rem(primes.size());
        for (std::size_t round = 0; round < max_rounds; ++round) {
            mpz_class q0 = rng.bits(qbits);
            mpz_setbit(q0.get_mpz_t(), qbits - 1);
            mpz_setbit(q0.get_mpz_t(), qbits - 2);
            mpz_setbit(q0.get_mpz_t(), 0);
            for (std::size_t i = 0; i < primes.size(); ++i)
                rem[i] = mpz_fdiv_ui(q0.get_mpz_t(), primes[i]);
            for (unsigned delta = 0; delta < window; delta += 2) {
                bool survives = true;
                for (std::size_t i = 0; i < primes.size(); ++i) {
                    const unsigned p = primes[i];
                    const unsigned rq = (rem[i] + delta) % p;
                    if (rq == 0 || (2 * rq + 1) % p == 0) {
                        survives = false;
                        break;
                    }
                }
                if (!survives)
                    continue;
                const mpz_class q = q0 + delta;
                const mpz_class p = 2 * q + 1;
                if (bit_length(p) != nbits)
                    break;
                if (!fermat_base2(q) || !fermat_base2(p))
                    continue;
                if (mpz_probab_prime_p(q.get_mpz_t(), 32) == 0 || mpz_probab_prime_p(p.get_mpz_t(), 32) == 0)
                    continue;
                return p;
            }
        }
        throw internal_error("safe prime generation failed after " + std::to_string(max_rounds) + " rounds");
    }

}
