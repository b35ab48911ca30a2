//! Prompt templates for every agent.
//!
//! Each builder is a pure function of its inputs so prompts can be frozen in
//! golden files.

use crate::registry::ToolSpec;

pub fn file_perception(file_path: &str, max_chars: usize, details: bool) -> String {
    let stats = if details {
        "- Count total rows and provide basic statistics"
    } else {
        "- No additional info needed."
    };
    let others = if details {
        "6. For other files, provide appropriate summary"
    } else {
        "6. For binary or other files, provide only file size."
    };
    format!(
        r#"Generate Python code to read and analyze the file: "{file_path}"

Your code should:
1. Import all modules used (e.g. import os).
2. Use appropriate libraries based on file type (pandas for tabular data, etc.)
3. For tabular files (csv, excel, parquet, etc.):
   - Display column names. If there are more than 20 columns, only display the first and last 10.
   - Show first 2-3 rows with truncated cell content
   - Do not show additional index column if it's not in the original table
   - If failed to open the file, treat it as text file
    {stats}
4. For text files:
   - Display first few lines (up to {max_chars} characters)
5. For compressed tabular or text files, show its decompressed content as described.
{others}
7. Keep the total output under {max_chars} characters

Return ONLY the Python code, no explanations or markdown. The code should be self-contained and executable on its own."#
    )
}

pub fn find_description_files(data_prompt: &str) -> String {
    format!(
        r#"Given this data prompt:

{data_prompt}

Please identify any files that appear to contain project
descriptions, requirements, or task definitions.
Look for files like README, documentation files, or task
description files.

Format your response as follows:
Description Files: [list ONLY the absolute path, one per line]
Explanation: [explain why these files were identified as description files]"#
    )
}

pub fn task_description(data_prompt: &str, description_analysis: &str, description_context: &str) -> String {
    format!(
        r#"Based on this data prompt and description files:

Data Prompt:
(IMPORTANT: The metadata of example files in Data Prompt may not be representative - do not make assumptions about data statistics based on examples.)

{data_prompt}

Description File Analysis:
{description_analysis}

Description File Contents:
{description_context}

Based ONLY on the information explicitly stated in the provided data prompt, description files, and analysis, provide a condensed description of the data science task. Include only details that are directly mentioned in the source materials.
Do not add assumptions or infer unstated information.
"#
    )
}

/// Renders the found description files for [`task_description`].
pub fn description_context(files: &[(String, String)]) -> String {
    files
        .iter()
        .map(|(path, content)| format!("File: {path}\nContent: {content}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn format_tools_info(tools: &[ToolSpec]) -> String {
    tools
        .iter()
        .map(|tool| {
            let mut block = format!(
                "Library Name: {}\nVersion: v{}\nDescription: {}",
                tool.name, tool.version, tool.description
            );
            if !tool.features.is_empty() {
                block.push_str("\nSpecial features/limitations:");
                for feature in &tool.features {
                    block.push_str("\n- ");
                    block.push_str(feature);
                }
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn library_selection(data_prompt: &str, description: &str, tools: &[ToolSpec]) -> String {
    let tools_info = format_tools_info(tools);
    format!(
        r#"Given the following data science task:

Data Description:
{data_prompt}

Task Analysis:
{description}

Available tools and their capabilities:

{tools_info}

Please select the most appropriate tool for this task. Consider:
1. The nature of the data (tabular, time series, multimodal, etc.)
2. The specific requirements of the task
3. Any limitations or special features of each tool

Format your response as follows:
Selected Tool: [tool name ONLY]
Explanation: [detailed explanation of why this tool is the best
choice, including specific features that match the task requirements]"#
    )
}

pub fn condensation(chunk: &str, index: usize, total: usize) -> String {
    let context = if index > 0 {
        "This is a continuation of the previous chunk. "
    } else {
        ""
    };
    let number = index + 1;
    format!(
        r#"{context}Condense this portion of the tutorial while preserving
essential implementation details, code samples, and key concepts.
Focus on:

1. Implementation details and techniques
2. Code snippets with necessary context
3. Critical configurations and parameters
4. Important warnings and best practices

Chunk {number}/{total}:
{chunk}

Provide the condensed content in markdown format."#
    )
}

pub fn summarization(condensed_content: &str) -> String {
    format!(
        r#"Generate a concise summary (within 100 words) of this tutorial
that helps a code generation LLM understand:
1. What specific implementation knowledge or techniques it can find
in this tutorial
2. What coding tasks this tutorial can help with
3. Key features or functionalities covered

Tutorial content:
{condensed_content}

Provide the summary in a single paragraph starting with
"Summary: "."#
    )
}

/// Appended to the summarization prompt after a non-compliant answer.
pub const SUMMARY_REPAIR: &str = "\n\nYour previous answer did not follow the required format. Reply with one paragraph of at most 100 words that starts with \"Summary: \".";

pub fn retrieval(
    task_prompt: &str,
    data_prompt: &str,
    user_prompt: &str,
    error_prompt: &str,
    tutorials_info: &str,
    max_num_tutorials: usize,
) -> String {
    let context = format!(
        "Task: {task_prompt}\nData: {data_prompt}\nUser Question: {user_prompt}\nPrevious Error: {error_prompt}"
    );
    format!(
        r#"Given the following context and list of tutorials with their summaries, select the {max_num_tutorials} most relevant tutorials for helping with this task. Consider how well each tutorial's title and summary match the task, data, user question, and any errors.

Context:
{context}

Available Tutorials:
{tutorials_info}

IMPORTANT: Respond ONLY with the numbers of the selected tutorials (up to {max_num_tutorials}) separated by commas. For example: "1,3,4" or "2,5" or just "1" if only one is relevant.
DO NOT include any other text, explanation, or formatting in your response."#
    )
}

#[allow(clippy::too_many_arguments)]
pub fn error_analysis(
    task_prompt: &str,
    data_prompt: &str,
    user_prompt: &str,
    python_code: &str,
    bash_script: &str,
    retrieved_tutorials: &str,
    error_message: &str,
) -> String {
    format!(
        r#"{task_prompt}
{data_prompt}
{user_prompt}
Previous Python Code:
{python_code}
Previous Bash Script to Execute the Python Code:
{bash_script}
{retrieved_tutorials}
Error Message:
{error_message}
Analyze the error message and context provided. Your response MUST contain exactly two short paragraphs as follows:

ERROR SUMMARY: Provide a brief, technical description of the error in 1-3 sentences. Focus only on identifying the root cause and affected component without background explanations.

SUGGESTED FIX: Offer specific debugging directions in 1-3 sentences. Do not include actual code or commands, only tactical debugging guidance.

Each paragraph must be concise (maximum 3 sentences). Do not include general advice, explanations beyond the direct debugging strategy, or any additional paragraphs."#
    )
}

/// Appended to a structured-output prompt after an unparseable answer.
pub fn format_repair(labels: &[&str]) -> String {
    format!(
        "\n\nYour previous answer could not be parsed. Reply again using exactly these labels: {}",
        labels.join(", ")
    )
}

/// Inputs of the solution-code prompt.
#[derive(Debug, Clone, Copy)]
pub struct SolutionPrompt<'a> {
    pub tool_name: &'a str,
    pub output_folder: &'a str,
    pub tool_prompt: &'a str,
    pub task_description: &'a str,
    pub data_prompt: &'a str,
    pub user_input: &'a str,
    pub error_block: &'a str,
    pub retrieved_docs: &'a str,
}

pub fn solution_code(p: &SolutionPrompt<'_>) -> String {
    let SolutionPrompt {
        tool_name,
        output_folder,
        tool_prompt,
        task_description,
        data_prompt,
        user_input,
        error_block,
        retrieved_docs,
    } = *p;
    format!(
        r#"
As an AutoML Agent, you will be given a folder containing data and description files. Please generate Python code using {tool_name} to train a predictor and make predictions on test data. Follow these specifications:

ONLY save files to the working directory: {output_folder}.

1. Data preprocessing:
   - Remove training data samples without valid labels (unless told not to do so).
   - Remove the unneccesary index column (if applicable)

2. Model training:
   - Use {tool_name} with appropriate parameters for the task
   - If a model is trained, save it in a folder with random timestamp within {output_folder}

3. Prediction:
   - Make predictions on the test data
   - Save the predicted results to {output_folder}, result file name should be "results", the format and extension should be same as the test data file
   - Output column names must exactly match those in the training or sample submission files without adding "predicted_" prefixes or creating any new columns.

4. Documentation:
   - Add a brief docstring at the beginning of the script explaining its purpose and usage
   - Also include additional installation steps with comments at the beginning of the script
   - Include comments explaining any complex operations or design decisions

5. Others:
   - To avoid DDP errors, wrap the code in: if __name__ == "__main__":
   - Ensure errors are propagated up and not silently caught - do not use try/except blocks unless you explicitly reraise the exception.

{tool_prompt}

Please provide the complete Python script that accomplishes these tasks, ensuring it's ready to run given the appropriate data inputs.

Task Description: {task_description}

{data_prompt}

{user_input}

{error_block}

{retrieved_docs}
"#
    )
}

/// Renders retrieved documents for the coder and error-analyzer prompts.
pub fn retrieved_documents(docs: &[(&str, &str)]) -> String {
    docs.iter()
        .map(|(title, body)| format!("### {title}\n{body}"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Follow-up user turn for the multi-turn coder.
pub fn multi_turn_followup(error_message: &str) -> String {
    format!(
        "The previous script failed.\n\nPrevious error:\n{error_message}\n\nPlease provide the complete fixed Python script."
    )
}

/// Environment branch of the shell-builder prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShellEnv {
    pub create_venv: bool,
    pub install_packages: bool,
}

/// Inputs of the shell-builder prompt. Empty strings mean "absent".
#[derive(Debug, Clone, Copy)]
pub struct ShellPrompt<'a> {
    pub env: ShellEnv,
    pub output_folder: &'a str,
    pub python_file_path: &'a str,
    pub current_python: &'a str,
    pub error_message: &'a str,
    pub previous_bash: &'a str,
    pub previous_python: &'a str,
}

/// `error_message` must already be truncated.
pub fn shell_script(p: &ShellPrompt<'_>) -> String {
    let mut instructions: Vec<String> = Vec::new();
    if p.env.create_venv {
        instructions.extend([
            format!("Create and configure a conda environment in {}:", p.output_folder),
            "- Python version: 3.11".into(),
            "- Activate the environment".into(),
            "- Install required packages".into(),
        ]);
    } else if p.env.install_packages {
        instructions.push(
            "The environment may not be fully configured. Install any packages required in the python code.".into(),
        );
    } else {
        instructions.push("The environment is already configured. Do not install or update any package.".into());
    }
    instructions.push(format!("Execute the Python script: {}", p.python_file_path));

    let numbered = instructions
        .iter()
        .enumerate()
        .map(|(i, instr)| format!("{}. {instr}", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let mut parts = vec!["Generate a minimal bash script that will:".to_string(), numbered];

    if !p.current_python.is_empty() {
        parts.push(format!("Current Python code:\n```python\n{}\n```", p.current_python));
    }
    if !p.error_message.is_empty() {
        parts.push(format!("Previous error:\n{}", p.error_message));
    }
    if !p.previous_bash.is_empty() && !p.error_message.is_empty() {
        parts.push(format!(
            "Previous failed bash script:\n```bash\n{}\n```",
            p.previous_bash
        ));
    }
    if !p.previous_python.is_empty() && !p.error_message.is_empty() {
        parts.push(format!("Previous Python code:\n```python\n{}\n```", p.previous_python));
    }
    parts.push(
        "Notes:\n- Generate a minimal, executable bash script\n- Focus on essential commands only\n- Handle common environment and package only if there were errors"
            .into(),
    );
    parts.join("\n\n")
}

pub fn execution_judgment(
    task_prompt: &str,
    data_prompt: &str,
    python_code: &str,
    stdout: &str,
    stderr: &str,
) -> String {
    let stdout = if stdout.is_empty() {
        "No standard output"
    } else {
        stdout
    };
    let stderr = if stderr.is_empty() { "No standard error" } else { stderr };
    format!(
        r#"You are an expert code evaluator. Analyze the execution results of the following Python code and determine if the execution was successful or if issues need to be fixed.

{task_prompt}{data_prompt}

## Python Code
```python
{python_code}
```

## Execution Results
### Standard Output (stdout)
```
{stdout}
```

### Standard Error (stderr)
```
{stderr}
```

Evaluate the execution results and decide on one of the following actions:
1. FINISH - If the execution was completely successful and met all requirements.
2. FIX - If there were errors, issues, or performance problems that need to be addressed.

Provide your decision in the following format:
DECISION: [FINISH or FIX]
ANALYSIS: [Brief analysis of errors if any, or "None" if no errors]

The error analysis should be brief but informative enough for another agent to understand what needs to be fixed.

Even if the code executed without throwing errors, it might still have issues with logic or not meet all requirements."#
    )
}
