// SPDX-License-Identifier: Apache-2.0
//
// csifb — analog and digital deep CSI feedback simulation for FDD massive MIMO
// Copyright (C) 2026 csifb contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------
//
// Byte-oriented carryless range coder (the classic cache/pending-0xFF
// construction). Frequencies are integer counts with total <= 1<<16; the
// emitted byte stream is most-significant-byte first and begins with one
// zero pad byte that absorbs carries.

#ifndef CSIFB_RANGECODER_HPP
#define CSIFB_RANGECODER_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace csifb
{

class RangeEncoder
{
public:
    static constexpr std::uint32_t kMaxTotal = 1u << 16;

    void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total)
    {
        range_ /= total;
        low_ += static_cast<std::uint64_t>(cum) * range_;
        range_ *= freq;
        while (range_ < kTop)
        {
            shift_low();
            range_ <<= 8;
        }
    }

    std::vector<std::uint8_t> finish()
    {
        for (int i = 0; i < 5; ++i)
            shift_low();
        return std::move(out_);
    }

private:
    static constexpr std::uint32_t kTop = 1u << 24;

    void shift_low()
    {
        if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0)
        {
            const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
            out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
            for (; pending_ > 0; --pending_)
                out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
            cache_ = static_cast<std::uint8_t>(low_ >> 24);
        }
        else
        {
            ++pending_;
        }
        low_ = (low_ << 8) & 0xFFFFFFFFull;
    }

    std::uint64_t low_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint8_t cache_ = 0; // first emitted byte is a zero pad
    std::uint64_t pending_ = 0;
    std::vector<std::uint8_t> out_;
};

class RangeDecoder
{
public:
    RangeDecoder(const std::uint8_t *data, std::size_t size) : data_(data), size_(size)
    {
        next_byte(); // pad byte
        for (int i = 0; i < 4; ++i)
            code_ = (code_ << 8) | next_byte();
    }

    /// Frequency slot of the next symbol; caller locates the symbol whose
    /// cumulative range covers it, then calls update.
    std::uint32_t decode_freq(std::uint32_t total)
    {
        range_ /= total;
        const std::uint32_t f = static_cast<std::uint32_t>(code_ / range_);
        return f >= total ? total - 1 : f;
    }

    void update(std::uint32_t cum, std::uint32_t freq)
    {
        code_ -= static_cast<std::uint64_t>(cum) * range_;
        range_ *= freq;
        while (range_ < kTop)
        {
            code_ = (code_ << 8) | next_byte();
            range_ <<= 8;
        }
    }

private:
    static constexpr std::uint32_t kTop = 1u << 24;

    std::uint8_t next_byte()
    {
        // Reading past the payload returns zeros; a well-formed stream never
        // needs them to resolve a symbol.
        return pos_ < size_ ? data_[pos_++] : 0;
    }

    const std::uint8_t *data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::uint64_t code_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
};

} // namespace csifb

#endif
