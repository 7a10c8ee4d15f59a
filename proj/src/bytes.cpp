#include <audita/bytes.hpp>
#include <audita/error.hpp>

namespace audita {

    std::string to_hex(byte_view bytes)
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(bytes.size() * 2);
        for (const auto b: bytes) {
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0xF]);
        }
        return out;
    }

    static int hex_value(char c)
    {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        if (c >= 'A' && c <= 'F')
            return c - 'A' + 10;
        return -1;
    }

    byte_string from_hex(std::string_view hex)
    {
        if (hex.size() % 2 != 0)
            throw decode_error("hex string has odd length");
        byte_string out;
        out.reserve(hex.size() / 2);
        for (std::size_t i = 0; i < hex.size(); i += 2) {
            const int hi = hex_value(hex[i]);
            const int lo = hex_value(hex[i + 1]);
            if (hi < 0 || lo < 0)
                throw decode_error("invalid hex character");
            out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
        }
        return out;
    }

    void byte_writer::u8(std::uint8_t v)
    {
        _out.push_back(v);
    }

    void byte_writer::u32(std::uint32_t v)
    {
        for (int shift = 24; shift >= 0; shift -= 8)
            _out.push_back(static_cast<std::uint8_t>(v >> shift));
    }

    void byte_writer::u64(std::uint64_t v)
    {
        for (int shift = 56; shift >= 0; shift -= 8)
            _out.push_back(static_cast<std::uint8_t>(v >> shift));
    }

    void byte_writer::raw(byte_view bytes)
    {
        _out.insert(_out.end(), bytes.begin(), bytes.end());
    }

    void byte_writer::field(byte_view bytes)
    {
        if (bytes.size() > UINT32_MAX)
            throw parameter_error("field too long for a 4-byte length prefix");
        u32(static_cast<std::uint32_t>(bytes.size()));
        raw(bytes);
    }

    std::uint8_t byte_reader::u8()
    {
        return raw(1)[0];
    }

    std::uint32_t byte_reader::u32()
    {
        const auto b = raw(4);
        std::uint32_t v = 0;
        for (const auto x: b)
            v = (v << 8) | x;
        return v;
    }

    std::uint64_t byte_reader::u64()
    {
        const auto b = raw(8);
        std::uint64_t v = 0;
        for (const auto x: b)
            v = (v << 8) | x;
        return v;
    }

    byte_view byte_reader::raw(std::size_t n)
    {
        if (n > remaining())
            throw decode_error("truncated input: need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
        const auto out = _in.subspan(_pos, n);
        _pos += n;
        return out;
    }

    byte_view byte_reader::field()
    {
        const auto len = u32();
        return raw(len);
    }

    void byte_reader::expect_end() const
    {
        if (!empty())
            throw decode_error("trailing bytes after record: " + std::to_string(remaining()));
    }

}
