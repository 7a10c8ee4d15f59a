#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace audita {

    using byte_string = std::vector<std::uint8_t>;
    using byte_view = std::span<const std::uint8_t>;

    std::string to_hex(byte_view bytes);
    byte_string from_hex(std::string_view hex);

    inline byte_view as_bytes(std::string_view s)
    {
        return { reinterpret_cast<const std::uint8_t *>(s.data()), s.size() };
    }

    // Canonical big-endian encoder. Variable-length fields carry a 4-byte
    // length prefix.
    class byte_writer {
    public:
        void u8(std::uint8_t v);
        void u32(std::uint32_t v);
        void u64(std::uint64_t v);
        void raw(byte_view bytes);
        void field(byte_view bytes);

        const byte_string &bytes() const &
        {
            return _out;
        }

        byte_string bytes() &&
        {
            return std::move(_out);
        }
    private:
        byte_string _out;
    };

    // Decoder counterpart; every read past the end throws decode_error.
    class byte_reader {
    public:
        explicit byte_reader(byte_view in): _in { in }
        {
        }

        std::uint8_t u8();
        std::uint32_t u32();
        std::uint64_t u64();
        byte_view raw(std::size_t n);
        byte_view field();

        bool empty() const noexcept
        {
            return _pos == _in.size();
        }

        std::size_t remaining() const noexcept
        {
            return _in.size() - _pos;
        }

        void expect_end() const;
    private:
        byte_view _in;
        std::size_t _pos = 0;
    };

}
