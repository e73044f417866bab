#pragma once

namespace dfs
{
inline constexpr char const kVersion[] = "0.1.0";
}
