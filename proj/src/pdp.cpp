#include <cmath>
#include <audita/bigint.hpp>
#include <audita/error.hpp>
#include <audita/pdp.hpp>

namespace audita::pdp {

    using crypto::hash_domain;

    std::size_t public_key::modulus_bits() const
    {
        return bigint::bit_length(modulus);
    }

    std::size_t public_key::modulus_bytes() const
    {
        return (modulus_bits() + 7) / 8;
    }

    std::size_t public_key::block_bits() const
    {
        const std::size_t reserved = coefficient_bits + max_challenge_log2 + headroom_slack_bits;
        const auto bits = modulus_bits();
        if (bits <= reserved + 8)
            throw parameter_error("modulus too small for PDP headroom");
        return bits - reserved;
    }

    std::size_t public_key::block_bytes() const
    {
        return block_bits() / 8;
    }

    std::size_t public_key::aggregate_bytes() const
    {
        return (8 * block_bytes() + coefficient_bits + max_challenge_log2 + 7) / 8;
    }

    mpz_class public_key::aggregate_bound() const
    {
        mpz_class bound = 1;
        mpz_mul_2exp(bound.get_mpz_t(), bound.get_mpz_t(), 8 * block_bytes() + coefficient_bits + max_challenge_log2);
        return bound;
    }

    byte_string public_key::serialize() const
    {
        byte_writer w;
        w.field(bigint::to_bytes(modulus));
        w.field(bigint::to_bytes(exponent));
        w.field(bigint::to_bytes(generator));
        w.field(file_id.bytes);
        return std::move(w).bytes();
    }

    public_key public_key::deserialize(byte_view b)
    {
        byte_reader r { b };
        public_key pk;
        pk.modulus = bigint::from_bytes(r.field());
        pk.exponent = bigint::from_bytes(r.field());
        pk.generator = bigint::from_bytes(r.field());
        pk.file_id = crypto::digest::from_bytes(r.field());
        r.expect_end();
        if (pk.modulus < 3 || mpz_even_p(pk.modulus.get_mpz_t()))
            throw decode_error("PDP modulus must be an odd integer > 2");
        if (pk.exponent < 3 || pk.generator <= 1 || pk.generator >= pk.modulus)
            throw decode_error("PDP exponent or generator out of range");
        return pk;
    }

    namespace {
        crypto::digest derive_file_id(const mpz_class &n, const mpz_class &e, const mpz_class &g)
        {
            byte_writer w;
            w.field(bigint::to_bytes(n));
            w.field(bigint::to_bytes(e));
            w.field(bigint::to_bytes(g));
            return crypto::hash(hash_domain::file_id, w.bytes());
        }
    }

    keypair keygen(std::size_t modulus_bits, byte_view seed)
    {
        if (modulus_bits != 1024 && modulus_bits != 2048 && modulus_bits != 3072)
            throw parameter_error("PDP modulus size must be 1024, 2048 or 3072 bits, got " + std::to_string(modulus_bits));
        bigint::drbg rng { seed };
        const std::size_t half = modulus_bits / 2;
        mpz_class p, q;
        for (int attempt = 0; attempt < 8; ++attempt) {
            p = bigint::generate_safe_prime(half, rng);
            q = bigint::generate_safe_prime(half, rng);
            if (p != q)
                break;
        }
        if (p == q)
            throw internal_error("could not draw two distinct safe primes");
        keypair kp;
        kp.sec.p = p;
        kp.sec.q = q;
        kp.pub.modulus = p * q;
        if (bigint::bit_length(kp.pub.modulus) != modulus_bits)
            throw internal_error("modulus has unexpected bit length");
        kp.pub.exponent = 65537;
        mpz_class lambda;
        mpz_lcm(lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(), mpz_class(q - 1).get_mpz_t());
        if (mpz_invert(kp.sec.private_exponent.get_mpz_t(), kp.pub.exponent.get_mpz_t(), lambda.get_mpz_t()) == 0)
            throw internal_error("public exponent not invertible mod lambda(N)");
        // g = a^2 generates QR_N when g != 1 and gcd(g - 1, N) = 1: the QR group
        // has order p'q', and those two checks rule out every proper subgroup.
        const auto &n = kp.pub.modulus;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 64)
                throw internal_error("could not find a generator of QR_N");
            const auto a = rng.below(n);
            mpz_class gcd;
            mpz_gcd(gcd.get_mpz_t(), a.get_mpz_t(), n.get_mpz_t());
            if (gcd != 1)
                continue;
            const mpz_class g = (a * a) % n;
            mpz_class gm1 = g - 1;
            mpz_gcd(gcd.get_mpz_t(), gm1.get_mpz_t(), n.get_mpz_t());
            if (g == 1 || gcd != 1)
                continue;
            kp.pub.generator = g;
            break;
        }
        kp.pub.file_id = derive_file_id(kp.pub.modulus, kp.pub.exponent, kp.pub.generator);
        return kp;
    }

    mpz_class full_domain_hash(const public_key &pk, std::uint64_t index)
    {
        byte_writer w;
        w.raw(pk.file_id.bytes);
        w.u64(index);
        byte_string wide(pk.modulus_bytes() + 16);
        crypto::expand(hash_domain::full_domain, w.bytes(), wide);
        const mpz_class x = bigint::from_bytes(wide) % pk.modulus;
        return (x * x) % pk.modulus;
    }

    chunk_tag tag(const keypair &keys, std::uint64_t index, byte_view block)
    {
        const auto &pk = keys.pub;
        if (block.size() > pk.block_bytes())
            throw parameter_error("block of " + std::to_string(block.size()) + " bytes exceeds the "
                + std::to_string(pk.block_bytes()) + "-byte headroom of this modulus");
        const auto f = bigint::from_bytes(block);
        const auto h = full_domain_hash(pk, index);
        const auto &p = keys.sec.p;
        const auto &q = keys.sec.q;
        const auto &d = keys.sec.private_exponent;
        // (h * g^f)^d evaluated mod p and mod q with exponents reduced mod p-1, q-1.
        const auto half = [&](const mpz_class &prime) {
            const mpz_class pm1 = prime - 1;
            const mpz_class dr = d % pm1;
            const mpz_class fd = (f * d) % pm1;
            const auto hp = bigint::powm(h % prime, dr, prime);
            const auto gp = bigint::powm(pk.generator % prime, fd, prime);
            return mpz_class { (hp * gp) % prime };
        };
        const auto tp = half(p);
        const auto tq = half(q);
        mpz_class q_inv;
        mpz_invert(q_inv.get_mpz_t(), q.get_mpz_t(), p.get_mpz_t());
        mpz_class diff = ((tp - tq) % p + p) % p;
        chunk_tag out;
        out.index = index;
        out.value = tq + q * ((diff * q_inv) % p);
        counters().tags.fetch_add(1, std::memory_order_relaxed);
        return out;
    }

    crypto::digest index_space_digest(std::span<const std::uint64_t> space)
    {
        byte_writer w;
        w.u64(space.size());
        for (const auto i: space)
            w.u64(i);
        return crypto::hash(hash_domain::challenge_index, { as_bytes("space"), w.bytes() });
    }

    std::vector<std::uint64_t> challenge_positions(std::uint64_t d, std::uint64_t space_size, byte_view seed)
    {
        if (d > space_size)
            throw parameter_error("challenge size d=" + std::to_string(d) + " exceeds index space of "
                + std::to_string(space_size));
        if (d == 0)
            return {};
        return crypto::sample_without_replacement(hash_domain::challenge_index, seed, space_size, d);
    }

    mpz_class challenge_coefficient(byte_view seed, std::uint64_t j)
    {
        byte_writer w;
        w.u64(j);
        const auto dg = crypto::hash(hash_domain::challenge_coefficient, { seed, w.bytes() });
        constexpr std::size_t coef_bytes = coefficient_bits / 8;
        const auto x = bigint::from_bytes(byte_view { dg.bytes }.last(coef_bytes));
        mpz_class range = 1;
        mpz_mul_2exp(range.get_mpz_t(), range.get_mpz_t(), coefficient_bits);
        range -= 1;
        return mpz_class { x % range } + 1;
    }

    challenge genchal(std::uint64_t d, std::span<const std::uint64_t> index_space, byte_view seed)
    {
        const auto positions = challenge_positions(d, index_space.size(), seed);
        challenge c;
        c.seed.assign(seed.begin(), seed.end());
        c.space_digest = index_space_digest(index_space);
        c.indexes.reserve(d);
        c.coefficients.reserve(d);
        for (std::size_t j = 0; j < positions.size(); ++j) {
            c.indexes.push_back(index_space[positions[j]]);
            c.coefficients.push_back(challenge_coefficient(seed, j));
        }
        return c;
    }

    byte_string challenge_wire::serialize() const
    {
        byte_writer w;
        w.u64(d);
        w.field(seed);
        w.raw(space_digest.bytes);
        return std::move(w).bytes();
    }

    challenge_wire challenge_wire::deserialize(byte_view b)
    {
        byte_reader r { b };
        challenge_wire w;
        w.d = r.u64();
        const auto s = r.field();
        w.seed.assign(s.begin(), s.end());
        w.space_digest = crypto::digest::from_bytes(r.raw(crypto::digest_size));
        r.expect_end();
        return w;
    }

    challenge_wire to_wire(const challenge &c)
    {
        return { c.size(), c.seed, c.space_digest };
    }

    challenge from_wire(const challenge_wire &w, std::span<const std::uint64_t> index_space)
    {
        if (index_space_digest(index_space) != w.space_digest)
            throw parameter_error("index space does not match the challenge digest");
        return genchal(w.d, index_space, w.seed);
    }

    byte_string proof::serialize(const public_key &pk) const
    {
        byte_writer w;
        w.field(bigint::to_bytes_fixed(aggregated_tag, pk.modulus_bytes()));
        w.field(bigint::to_bytes_fixed(aggregated_data, pk.aggregate_bytes()));
        return std::move(w).bytes();
    }

    proof proof::deserialize(byte_view b)
    {
        byte_reader r { b };
        proof p;
        p.aggregated_tag = bigint::from_bytes(r.field());
        p.aggregated_data = bigint::from_bytes(r.field());
        r.expect_end();
        return p;
    }

    proof genproof(const public_key &pk, const challenge &chal, const block_lookup &lookup)
    {
        if (chal.coefficients.size() != chal.indexes.size())
            throw parameter_error("challenge has mismatched index and coefficient counts");
        proof out;
        out.aggregated_tag = 1;
        out.aggregated_data = 0;
        for (std::size_t j = 0; j < chal.indexes.size(); ++j) {
            const auto idx = chal.indexes[j];
            const auto ref = lookup(idx);
            if (!ref || !ref->tag)
                throw incomplete_input_error("no block or tag held for challenged index " + std::to_string(idx));
            const auto &a = chal.coefficients[j];
            out.aggregated_tag = (out.aggregated_tag * bigint::powm(*ref->tag, a, pk.modulus)) % pk.modulus;
            out.aggregated_data += a * bigint::from_bytes(ref->data);
        }
        counters().proofs.fetch_add(1, std::memory_order_relaxed);
        return out;
    }

    proof genproof(const public_key &pk, const challenge &chal,
        const std::map<std::uint64_t, byte_string> &blocks, const std::map<std::uint64_t, chunk_tag> &tags)
    {
        return genproof(pk, chal, [&](std::uint64_t idx) -> std::optional<block_ref> {
            const auto b = blocks.find(idx);
            const auto t = tags.find(idx);
            if (b == blocks.end() || t == tags.end())
                return std::nullopt;
            return block_ref { b->second, &t->second.value };
        });
    }

    bool checkproof(const public_key &pk, const challenge &chal, const proof &pi)
    {
        counters().checks.fetch_add(1, std::memory_order_relaxed);
        if (chal.coefficients.size() != chal.indexes.size())
            return false;
        if (pi.aggregated_tag <= 0 || pi.aggregated_tag >= pk.modulus)
            return false;
        if (pi.aggregated_data < 0 || pi.aggregated_data >= pk.aggregate_bound())
            return false;
        const auto lhs = bigint::powm(pi.aggregated_tag, pk.exponent, pk.modulus);
        mpz_class rhs = bigint::powm(pk.generator, pi.aggregated_data, pk.modulus);
        for (std::size_t j = 0; j < chal.indexes.size(); ++j) {
            const auto h = full_domain_hash(pk, chal.indexes[j]);
            rhs = (rhs * bigint::powm(h, chal.coefficients[j], pk.modulus)) % pk.modulus;
        }
        return lhs == rhs;
    }

    bounds detection_probability_bounds(std::uint64_t m, std::uint64_t t, std::uint64_t d)
    {
        if (m == 0 || t > m)
            throw parameter_error("need 0 <= t <= m with m >= 1");
        if (d < 1 || d > m - t)
            throw parameter_error("need 1 <= d <= m - t");
        const double md = static_cast<double>(m);
        const double td = static_cast<double>(t);
        const double dd = static_cast<double>(d);
        bounds b;
        b.lower = -std::expm1(dd * std::log1p(-td / md));
        const double denom = md - dd + 1.0;
        b.upper = denom > td ? -std::expm1(dd * std::log1p(-td / denom)) : 1.0;
        return b;
    }

    work_counters &counters()
    {
        static work_counters c;
        return c;
    }

}
