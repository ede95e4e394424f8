#include "varireal/pairing.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"

#include <algorithm>
#include <map>

namespace varireal {

std::vector<PromptRecord> accepted_prompts(std::span<const PromptRecord> bank, int class_id,
                                           AttributeCategory category, Feasibility feasibility, int k) {
  std::vector<PromptRecord> out;
  for (const auto& p : bank)
    if (p.class_id == class_id && p.category == category && p.feasibility == feasibility &&
        p.status == PromptStatus::manual_accepted)
      out.push_back(p);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.prompt_id < b.prompt_id; });
  if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(k));
  return out;
}

std::vector<GenerationJob> pair_real_with_prompts(std::span<const ImageRecord> real_images,
                                                  std::span<const PromptRecord> prompt_bank, int k,
                                                  AttributeCategory category) {
  if (k < 0) throw Error(Errc::invalid_argument, "k must be non-negative");
  std::vector<GenerationJob> jobs;
  if (k == 0) return jobs;

  std::map<std::pair<int, Feasibility>, std::vector<PromptRecord>> groups;
  for (const auto& img : real_images) {
    if (img.kind != ImageKind::real) throw Error(Errc::precondition, "pairing expects real images: " + img.image_id);
    for (Feasibility f : kAllFeasibilities) {
      auto key = std::make_pair(img.class_id, f);
      if (groups.count(key)) continue;
      auto prompts = accepted_prompts(prompt_bank, img.class_id, category, f, k);
      if (static_cast<int>(prompts.size()) < k)
        throw Error(Errc::insufficient_prompts,
                    "class " + std::to_string(img.class_id) + " has " + std::to_string(prompts.size()) + " accepted " +
                        std::string(to_string(f)) + " " + std::string(to_string(category)) + " prompts, need " +
                        std::to_string(k) + "; regenerate the prompt bank");
      groups.emplace(key, std::move(prompts));
    }
  }

  std::map<int, int> index_in_class;
  jobs.reserve(real_images.size() * 2 * static_cast<std::size_t>(k));
  for (const auto& img : real_images) {
    const int offset = index_in_class[img.class_id]++;
    for (Feasibility f : kAllFeasibilities) {
      const auto& prompts = groups.at({img.class_id, f});
      for (int j = 0; j < k; ++j) {
        const auto& p = prompts[static_cast<std::size_t>((offset + j) % k)];
        GenerationJob job;
        job.job_id = make_job_id(img.image_id, p.prompt_id);
        job.real_image_id = img.image_id;
        job.prompt_id = p.prompt_id;
        job.category = category;
        job.feasibility = f;
        job.attempt = 1;
        job.seed = derive_seed(img.image_id, p.prompt_id, 1);
        jobs.push_back(std::move(job));
      }
    }
  }
  return jobs;
}

}  // namespace varireal
