#pragma once

// Prompt template texts. The byte content is pinned by golden tests; bump
// kTemplateVersion whenever any of these strings changes.
//
// Placeholders: {target} is the target-parameter JSON block, {samples} the
// rendered history.

#include <string_view>

namespace beamtune::prompts {

inline constexpr std::string_view kTemplateVersion = "beamtune.prompts/1";

inline constexpr std::string_view kTuningTemplate =
    R"(Human: Now you will help me optimise the horizontal and vertical position and size of an electron beam on a diagnostic screen in a particle accelerator.

You are able to control five magnets in the beam line. The magnets are called Q1, Q2, CV, Q3 and CH.

Q1, Q2 and Q3 are quadrupole magnets. You are controlling their k1 strength in m^-2. Their range is -30.0 to 30.0 m^-2.

CV is vertical steering magnet. You control its steering angle in mrad. Its range is -6.0 to 6.0 mrad.

CH is horizontal steering magnet. You control its steering angle in mrad. Its range is -6.0 to 6.0 mrad.

You are optimising four beam parameters: mu_x, sigma_x, mu_y, sigma_y. The beam parameters are measured in millimetres (mm). The target beam parameters are:

Target beam parameters:
{target}

Below are previously measured pairs of magnet settings and the corresponding observed beam parameters.

{samples}

Give me new magnet settings that are different from all pairs above. The magnet settings you should propose should lead to beam parameters closer the target or, if you do not have enough information yet, maximise information gain for finding new beam parameters. Do not set any magnet setting to zero. Smooth changes relative to the last magnet settings are preferred.

The output should be a markdown code snippet formatted in the following schema, including the leading and trailing "```json" and "```":

```
{
    "Q1": float  // k1 strength of the first quadrupole magnet
    "Q2": float  // k1 strength of the second quadrupole magnet
    "CV": float  // Deflection angle of the vertical steering magnet
    "Q3": float  // k1 strength of the third quadrupole magnet
    "CH": float  // Deflection angle of the horizontal steering magnet
}
```

Do not add comments to the output JSON.)";

inline constexpr std::string_view kExplainedTemplate =
    R"(Human: Now you will help me optimise the horizontal and vertical position and size of an electron beam on a diagnostic screen in a particle accelerator.

You are able to control five magnets in the beam line. The magnets are called Q1, Q2, CV, Q3 and CH.

Q1, Q2 and Q3 are quadrupole magnets. When their k1 strength is increased, the beam becomes more focused in the horizontal plane and more defocused in the vertical plane. When their k1 strength is decreased, the beam becomes more focused in the vertical plane and more defocused in the horizontal plane. When their k1 strength is zero, the beam is not focused in either plane. Quadrupole magnets might also steer the beam in the horizontal or vertical plane depending on their k0 strength, when the beam does not travel through the centre of the magnet. The range of the k1 strength is -30.0 to 30.0 m^-2.

CV is vertical steering magnet. When its deflection angle is increased, the beam is steered upwards. When its deflection angle is decreased, the beam is steered downwards. The range of the deflection angle is -6.0 to 6.0 mrad.

CH is horizontal steering magnet. When its deflection angle is increased, the beam is steered to the right. When its deflection angle is decreased, the beam is steered to the left. The range of the deflection angle is -6.0 to 6.0 mrad.

You are optimising four beam parameters: mu_x, sigma_x, mu_y, sigma_y. The beam parameters are measured in millimetres (mm). The target beam parameters are:

Target beam parameters:
{target}

Below are previously measured pairs of magnet settings and the corresponding observed beam parameters.

{samples}

Give me new magnet settings that are different from all pairs above. The magnet settings you should propose should lead to beam parameters closer the target or, if you do not have enough information yet, maximise information gain for finding new beam parameters. Do not set any magnet setting to zero. Smooth changes relative to the last magnet settings are preferred.
{reasoning_request}
The output should be a markdown code snippet formatted in the following schema, including the leading and trailing "```json" and "```":

```json
{
    "Q1": float  // k1 strength of the first quadrupole magnet
    "Q2": float  // k1 strength of the second quadrupole magnet
    "CV": float  // Deflection angle of the vertical steering magnet
    "Q3": float  // k1 strength of the third quadrupole magnet
    "CH": float  // Deflection angle of the horizontal steering magnet
}
```

Do not add comments to the output JSON.)";

/// Inserted into the explained template (between the request and the
/// output instructions) to form the chain-of-thought prompt.
inline constexpr std::string_view kReasoningRequest =
    "\nFirst, reason about how and why you would change the magnet settings in a certain direction. "
    "Then give me the proposed magnet settings afterwards.\n";

inline constexpr std::string_view kOptimisationTemplate =
    R"(Human: Now you will help me minimise a function with five input variables Q1, Q2, CV, Q3 and CH. I have some (Q1, Q2, CV, Q3, CH) pairs and the corresponding function values at those points. The samples are arranged in descending order based on their function values, where lower values are better.

{samples}

Give me a new sample (Q1, Q2, CV, Q3, CH) that is different from all pairs above, and has a function value lower than any of the above.

The output should be a markdown code snippet formatted in the following schema, including the leading and trailing "```json" and "```":

```json
{
    "Q1": float  // First input
    "Q2": float  // Second input
    "CV": float  // Third input
    "Q3": float  // Fourth input
    "CH": float  // Fifth input
}
```)";

/// System prompts of the model families that ship with one by default.
inline constexpr std::string_view kOrcaSystemPrompt =
    "You are Orca, an AI language model created by Microsoft. You are a cautious assistant. You carefully "
    "follow instructions. You are helpful and harmless and you follow ethical guidelines and promote positive "
    "behavior.";

inline constexpr std::string_view kVicunaSystemPrompt =
    "A chat between a curious user and an artificial intelligence assistant. The assistant gives helpful, "
    "detailed, and polite answers to the user's questions.";

}  // namespace beamtune::prompts
