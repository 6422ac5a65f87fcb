import type {
  AttributeSchema,
  EditRequestPayload,
  EditResponsePayload,
  FieldError,
} from "./types.js";
import { parseSchema } from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly field?: string;

  constructor(status: number, detail: FieldError) {
    super(detail.message ?? detail.id ?? `service error ${status}`);
    this.status = status;
    this.field = detail.field;
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let detail: FieldError = {};
  try {
    detail = ((await response.json()) as { error?: FieldError }).error ?? {};
  } catch {
    // non-JSON error body; keep the bare status
  }
  return new ApiError(response.status, detail);
}

export class EditClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ status: string; checkpoint_id: string }> {
    const response = await fetch(this.url("/health"));
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as { status: string; checkpoint_id: string };
  }

  async attributes(): Promise<AttributeSchema> {
    const response = await fetch(this.url("/attributes"));
    if (!response.ok) throw await errorFrom(response);
    return parseSchema(await response.json());
  }

  async edit(payload: EditRequestPayload): Promise<EditResponsePayload> {
    const response = await fetch(this.url("/edit"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as EditResponsePayload;
  }
}
