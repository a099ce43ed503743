// SPDX-License-Identifier: Apache-2.0
//
// nfloc - near-field source localization under mutual coupling
// Copyright (C) 2026 The nfloc authors
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

#ifndef NFLOC_PEAKS_HPP
#define NFLOC_PEAKS_HPP

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfloc
{
    // Thrown when a spectrum has fewer local maxima than requested sources.
    class PeakSearchError : public std::runtime_error
    {
    public:
        PeakSearchError(std::size_t wanted, std::vector<std::size_t> found)
            : std::runtime_error("peak search: wanted " + std::to_string(wanted) + " local maxima, found " +
                                 std::to_string(found.size()) + describe(found)),
              found_(std::move(found))
        {
        }

        const std::vector<std::size_t> &found() const noexcept { return found_; }

    private:
        static std::string describe(const std::vector<std::size_t> &found)
        {
            std::string s;
            for (std::size_t i = 0; i < found.size(); ++i)
                s += (i == 0 ? " at index " : ", ") + std::to_string(found[i]);
            return s;
        }

        std::vector<std::size_t> found_;
    };

    // Local-maximum rule on a plateau: a node qualifies when it is strictly greater than every
    // neighbour with a lower linear index and not smaller than every neighbour with a higher one.
    // Strict maxima always qualify; on a flat run only its first node does.
    //
    // The result holds the linear indices of the `count` largest qualifying nodes, by descending value,
    // ties broken by lower index.
    namespace detail
    {
        inline void sort_by_value(std::span<const double> values, std::vector<std::size_t> &indices)
        {
            std::stable_sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
        }

        inline std::vector<std::size_t> top_candidates(std::span<const double> values, std::vector<std::size_t> candidates,
                                                       std::size_t count)
        {
            sort_by_value(values, candidates);
            if (candidates.size() < count)
                throw PeakSearchError(count, std::move(candidates));
            candidates.resize(count);
            return candidates;
        }
    }

    // Every local maximum of a 1D spectrum, by descending value.
    inline std::vector<std::size_t> local_maxima(std::span<const double> values)
    {
        std::vector<std::size_t> candidates;
        const std::size_t n = values.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            const double v = values[i];
            if (i > 0 && !(v > values[i - 1]))
                continue;
            if (i + 1 < n && !(v >= values[i + 1]))
                continue;
            candidates.push_back(i);
        }
        detail::sort_by_value(values, candidates);
        return candidates;
    }

    inline std::vector<std::size_t> find_peaks(std::span<const double> values, std::size_t count)
    {
        if (values.empty())
            throw std::invalid_argument("find_peaks: empty spectrum");
        auto peaks = local_maxima(values);
        if (peaks.size() < count)
            throw PeakSearchError(count, std::move(peaks));
        peaks.resize(count);
        return peaks;
    }

    // 2D variant over a row-major rows x cols grid with the 4-neighbourhood. Returns linear indices.
    inline std::vector<std::size_t> find_peaks_2d(std::span<const double> values, std::size_t rows, std::size_t cols,
                                                  std::size_t count)
    {
        if (values.empty() || rows * cols != values.size())
            throw std::invalid_argument("find_peaks_2d: grid shape does not match value count");
        std::vector<std::size_t> candidates;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
            {
                const std::size_t i = r * cols + c;
                const double v = values[i];
                if (r > 0 && !(v > values[i - cols]))
                    continue;
                if (c > 0 && !(v > values[i - 1]))
                    continue;
                if (c + 1 < cols && !(v >= values[i + 1]))
                    continue;
                if (r + 1 < rows && !(v >= values[i + cols]))
                    continue;
                candidates.push_back(i);
            }
        return detail::top_candidates(values, std::move(candidates), count);
    }

    // Index of the global maximum, first occurrence on ties.
    inline std::size_t argmax(std::span<const double> values)
    {
        if (values.empty())
            throw std::invalid_argument("argmax: empty spectrum");
        return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    }
}

#endif // NFLOC_PEAKS_HPP
