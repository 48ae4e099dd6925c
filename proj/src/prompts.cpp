#include "coevolve/prompts.hpp"

#include <stdexcept>

namespace coevolve::prompts {

namespace {

constexpr std::string_view k_exploration_system = R"tmpl(You are exploring based on specific guidance to help improve an AI agent's capabilities.

## Your Task:
1. Observe the current environment state and identify available actions
2. Analyze available actions and determine which ones will help with the exploration goal
3. Select a relevant action and execute it in the required format
4. Focus on thorough exploration of the targeted area

# Action Format:
{action_format}

## Instructions:
- Choose only one action at a time
- Carefully read the environment description and task instructions
- Ensure that the action is in the correct format
- Do not use undefined actions
- Always include a valid action and action tags in your reply
- First enter your reason, then enter your action
)tmpl";

constexpr std::string_view k_exploration_user = R"tmpl({exploration_guidance}

## Environment Description:
{initial_obs}

## Recent History:
{history_text}

Please select an appropriate action based on the exploration goal and current state.
)tmpl";

constexpr std::string_view k_guidance_forgetting = R"tmpl(Exploration Goal: Reinforce Forgotten Skills

The agent previously succeeded but now FAILS on this type of task.

Your exploration should:
1. Practice the exact operations from the context below
2. Create variations with different parameters
3. Connect this skill to related operations
4. Build up from simple to complex usage

Context of forgetting:
{context}

Focus on thorough practice of these specific operations.
)tmpl";

constexpr std::string_view k_guidance_rare = R"tmpl(Exploration Goal: Explore Rare Scenarios

The agent encountered a RARE scenario that needs more exposure.

Your exploration should:
1. Explore variations of the scenario below
2. Try different parameter combinations
3. Test edge cases and boundary conditions
4. Collect diverse examples of this rare pattern

Context of rare event:
{context}

Try to discover and document various forms of this scenario.
)tmpl";

constexpr std::string_view k_guidance_boundary = R"tmpl(Exploration Goal: Explore Boundary Cases

The agent's performance is BORDERLINE (near success/failure threshold).

Your exploration should:
1. Explore boundary conditions for these operations
2. Try similar tasks with slight parameter variations
3. Focus on distinguishing factors between success and failure
4. Collect examples at various difficulty levels

Context of boundary case:
{context}

Focus on understanding what makes the difference between success and failure.
)tmpl";

constexpr std::string_view k_context_summary = R"tmpl(You are an expert at analyzing trajectory-level failure and behavioral instability for an LLM agent.

Analyze the following feedback signal and trajectory evidence:

Feedback Signal:
- Signal: {signal}

Trajectory Evidence:
{trajectory_context}

Your goal is to extract a structured exploration context that captures:
1) A concise recap of this trajectory
2) Why failure or instability happened
3) Which patterns or behaviors should be re-explored
4) What mistakes should be explicitly avoided

Return a JSON object with this schema:
{
  "summary": "concise recap of the current trajectory evidence (task, key actions, and feedback outcome)",
  "failure_cause": "1-3 sentence root cause of failure or instability",
  "instability_pattern": "1-2 sentence pattern summary",
  "focus_pattern": ["pattern or behavior to focus on", "..."],
  "exploration_objectives": ["concrete exploration objective", "..."],
  "do_not_repeat": ["common mistake to avoid", "..."]
}

Rules:
- Ground every statement in the provided evidence.
- Keep the output concise and actionable.
- First produce `summary` from the trajectory evidence, then derive the other fields from that summary.
)tmpl";

constexpr std::string_view k_task_abstraction = R"tmpl(You are a *Task Abstraction Expert*. Your specialty is to inspect an agent's
interaction history and distill concrete, goal-oriented tasks from it.

========================  YOUR JOB  ========================
1. Inspect the interaction tuples (history, action, observation).
2. Identify the specific goal or task the agent is attempting to achieve.
3. Abstract each goal into a clear, concise task description, a query
   (suitable for search or training), and the minimal action sequence
   that successfully completes the task.

=====================  ABSTRACTION RULES  ==================
- Focus on clear, goal-directed behaviour; ignore purely random exploration.
- Please include as many steps as possible in ActionSequence.
- Group similar behaviour patterns into the same task.
- Every task must have at least one action sequence that was executed successfully.
- Each task needs an explicit completion criterion.
- All actions listed in an action sequence must be valid and directly executable.
- Ensure all actions are combined into a minimum sequence from initial state to completion.
- The ActionSequence should have at least 3 steps.

========================  OUTPUT FORMAT  ===================
For every task you identify, output exactly one block in the form below:
{output_format}
)tmpl";

constexpr std::string_view k_task_validation = R"tmpl(You are a strict task evaluation expert. Your goal is to determine whether the following multi-step agent trajectory successfully completed the assigned task.

# Task Details
- Task Description: {task_description}
- Query: {query}
- Expected Outcome (API Call or Result): {ground_truth}
- Action Modality: {modality_hint}

# Execution Summary
- Trajectory Summary:
{trajectory_summary}

- Final Observation: {final_observation}

# Evaluation Instructions

Carefully analyze the trajectory to determine if the task was truly completed. Specifically, consider the following aspects:

1. API Matching: Did the agent correctly call the required APIs according to the task requirements?
2. Parameter Usage: Were the parameters used in API calls correct and sufficient?
3. Logical Flow: Was the sequence of steps logical without unreasonable skips?
4. Final Result: Did the final state achieve the expected outcome, reasonably solve the task, obtain all necessary information, and complete the task objectives?
5. Failed or Skipped Steps: Were there any critical errors, skipped steps, or invalid code that prevented the task from being actually executed?

# Format Your Response Strictly As:

Success: [true/false]
Reason: [Concise and specific explanation, referring to the above criteria.]

Note: Do NOT mark the task as successful if the correct tool was never called, the parameters were incorrect, or the result was not achieved, even if the intent seemed right.
)tmpl";

constexpr std::string_view k_action_format = R"tmpl(State your reasoning first, then reply with exactly one action wrapped in action tags:
<action>tool_name</action>
The tool name must be one of the tools listed in the environment description. Arguments, when a tool takes any, follow the tool name separated by single spaces inside the same tags.
)tmpl";

}  // namespace

std::string_view exploration_system() { return k_exploration_system; }
std::string_view exploration_user() { return k_exploration_user; }
std::string_view guidance_forgetting() { return k_guidance_forgetting; }
std::string_view guidance_rare() { return k_guidance_rare; }
std::string_view guidance_boundary() { return k_guidance_boundary; }
std::string_view context_summary() { return k_context_summary; }
std::string_view task_abstraction() { return k_task_abstraction; }
std::string_view task_validation() { return k_task_validation; }
std::string_view action_format() { return k_action_format; }

std::vector<std::pair<std::string, std::string_view>> all_templates() {
    return {
        {"exploration_system.txt", k_exploration_system},
        {"exploration_user.txt", k_exploration_user},
        {"guidance_forgetting.txt", k_guidance_forgetting},
        {"guidance_rare.txt", k_guidance_rare},
        {"guidance_boundary.txt", k_guidance_boundary},
        {"context_summary.txt", k_context_summary},
        {"task_abstraction.txt", k_task_abstraction},
        {"task_validation.txt", k_task_validation},
        {"action_format.txt", k_action_format},
    };
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
    std::string out(tmpl);
    for (const auto& [key, value] : values) {
        std::string placeholder = "{" + key + "}";
        std::size_t pos = out.find(placeholder);
        if (pos == std::string::npos) {
            throw std::domain_error("render_template: no placeholder {" + key + "}");
        }
        while (pos != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos = out.find(placeholder, pos + value.size());
        }
    }
    return out;
}

}  // namespace coevolve::prompts
