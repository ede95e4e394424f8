#pragma once

#include "varireal/types.hpp"

#include <span>
#include <vector>

namespace varireal {

// Accepted prompts for one (class, category, feasibility) group, in stable
// prompt_id order, truncated to the first k.
std::vector<PromptRecord> accepted_prompts(std::span<const PromptRecord> bank, int class_id,
                                           AttributeCategory category, Feasibility feasibility, int k);

// Pairs every real image with k feasible and k infeasible prompts of its class.
// Per image the prompt order is rotated by the image's index within its class,
// so assignment cycles deterministically through the class's prompts.
// Throws Errc::insufficient_prompts when a class lacks k accepted prompts of a feasibility.
std::vector<GenerationJob> pair_real_with_prompts(std::span<const ImageRecord> real_images,
                                                  std::span<const PromptRecord> prompt_bank, int k,
                                                  AttributeCategory category);

}  // namespace varireal
