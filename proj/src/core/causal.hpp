#pragma once

#include <map>
#include <utility>
#include <vector>

#include "trace.hpp"

namespace mcrv {

// Conservative footprint of one record: the resources it touches and how.
// Unknown syscalls touch everything, so they never commute.
struct Footprint {
    enum class Res : u8 { Fd = 0, Path = 1, FdTable = 2, Namespace = 3, Pid = 4, Universe = 5 };
    struct Key {
        Res res;
        i64 num = 0;
        std::string str;
        auto operator<=>(const Key&) const = default;
    };
    // true = mutates, false = read-only-and-cursor-free
    std::map<Key, bool> access;

    void read(Res r, i64 num = 0, std::string str = {});
    void mutate(Res r, i64 num = 0, std::string str = {});
};

Footprint footprint(const SyscallRecord& rec);

// Two records commute when their footprints are disjoint or overlap only on
// resources both access read-only. Reads on the same fd share a cursor and
// do not commute.
bool commutes(const SyscallRecord& a, const SyscallRecord& b);

// The causality-induced partial order: i precedes j iff i comes before j in
// every sequence reachable from the trace by swapping adjacent commuting
// entries. Computed as reachability over non-commuting pairs; the test
// suite checks the equivalence against a brute-force swap oracle.
struct CausalOrder {
    u32 n = 0;
    std::vector<std::vector<bool>> before; // full transitively closed relation

    bool precedes(u32 i, u32 j) const { return before[i][j]; }

    // Every ordered pair of the relation.
    std::vector<std::pair<u32, u32>> edges() const;

    // Transitive reduction, for display.
    std::vector<std::pair<u32, u32>> hasse() const;

    // True when all causal predecessors of j are consumed.
    bool minimal_unconsumed(u32 j, const std::vector<bool>& consumed) const;
};

CausalOrder causal_order(const Trace& t);

} // namespace mcrv
