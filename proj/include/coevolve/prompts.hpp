#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace coevolve::prompts {

// Embedded copies of the files under assets/prompts/. The library renders
// from these so binaries stay self-contained; test_explorer asserts byte
// equality with the files on disk.
std::string_view exploration_system();
std::string_view exploration_user();
std::string_view guidance_forgetting();
std::string_view guidance_rare();
std::string_view guidance_boundary();
std::string_view context_summary();
std::string_view task_abstraction();
std::string_view task_validation();
std::string_view action_format();

// Asset file basename for each template above, in the same order.
std::vector<std::pair<std::string, std::string_view>> all_templates();

// Replaces each "{key}" from values exactly; placeholders are explicit, so
// literal braces elsewhere in a template (e.g. JSON schemas) pass through
// untouched. A key whose placeholder is absent is a domain error.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

}  // namespace coevolve::prompts
